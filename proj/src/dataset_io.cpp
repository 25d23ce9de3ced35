#include "itcl/dataset_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "itcl/io/png.hpp"

namespace itcl {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

Tensor image_to_tensor(const io::Image8& img, const std::vector<double>& mean,
                       const std::vector<double>& stdev) {
    const int c = static_cast<int>(mean.size());
    Tensor t({c, img.height, img.width});
    for (int ch = 0; ch < c; ++ch) {
        // grayscale sources broadcast; RGBA sources drop alpha
        const int src = img.channels == 1 ? 0 : std::min(ch, img.channels - 1);
        for (int i = 0; i < img.height; ++i)
            for (int j = 0; j < img.width; ++j) {
                const double v =
                    img.pixels[(static_cast<size_t>(i) * img.width + j) * img.channels + src] /
                    255.0;
                t.data[(static_cast<size_t>(ch) * img.height + i) * img.width + j] =
                    (v - mean[static_cast<size_t>(ch)]) / stdev[static_cast<size_t>(ch)];
            }
    }
    return t;
}

} // namespace

LabeledDataset load_directory_dataset(const std::string& root) {
    const fs::path rootp(root);
    const fs::path manifest_path = rootp / "manifest.json";
    std::ifstream mf(manifest_path);
    if (!mf) throw IoError("missing manifest: " + manifest_path.string());
    json manifest = json::parse(mf);

    LabeledDataset ds;
    ds.class_names = manifest.at("classes").get<std::vector<std::string>>();
    ds.source_id = manifest.value("source_id", root);
    std::vector<double> mean = manifest.value("mean", std::vector<double>{0.5, 0.5, 0.5});
    std::vector<double> stdev = manifest.value("std", std::vector<double>{0.25, 0.25, 0.25});
    if (mean.size() != stdev.size() || mean.empty())
        throw ConfigInvalid("manifest mean/std must be non-empty and equal length");

    int next_id = 0;
    for (const char* split_name : {"train", "test"}) {
        const fs::path split_dir = rootp / split_name;
        if (!fs::exists(split_dir)) continue;
        for (size_t label = 0; label < ds.class_names.size(); ++label) {
            const fs::path class_dir = split_dir / ds.class_names[label];
            if (!fs::exists(class_dir)) continue;
            std::vector<fs::path> files;
            for (const auto& e : fs::directory_iterator(class_dir))
                if (e.is_regular_file() && e.path().extension() == ".png")
                    files.push_back(e.path());
            std::sort(files.begin(), files.end());
            for (const fs::path& f : files) {
                Sample s;
                s.label = static_cast<int>(label);
                s.id = next_id++;
                s.split = std::string(split_name) == "train" ? Split::train : Split::test;
                s.image = image_to_tensor(io::read_png(f.string()), mean, stdev);
                ds.samples.push_back(std::move(s));
            }
        }
    }
    ds.validate();
    return ds;
}

void save_directory_dataset(const std::string& root, const LabeledDataset& ds,
                            const std::vector<double>& mean,
                            const std::vector<double>& stdev) {
    const fs::path rootp(root);
    fs::create_directories(rootp);
    json manifest = {{"classes", ds.class_names},
                     {"source_id", ds.source_id},
                     {"mean", mean},
                     {"std", stdev}};
    std::ofstream mf(rootp / "manifest.json");
    mf << manifest.dump(2) << "\n";

    std::vector<int> counter(ds.class_names.size(), 0);
    for (const Sample& s : ds.samples) {
        const char* split = s.split == Split::test ? "test" : "train";
        const fs::path dir = rootp / split / ds.class_names[static_cast<size_t>(s.label)];
        fs::create_directories(dir);
        const int c = s.image.dim(0), h = s.image.dim(1), w = s.image.dim(2);
        io::Image8 img;
        img.width = w;
        img.height = h;
        img.channels = c == 1 ? 1 : 3;
        img.pixels.resize(static_cast<size_t>(w) * h * img.channels);
        for (int i = 0; i < h; ++i)
            for (int j = 0; j < w; ++j)
                for (int ch = 0; ch < img.channels; ++ch) {
                    const int src = std::min(ch, c - 1);
                    double v = s.image.data[(static_cast<size_t>(src) * h + i) * w + j];
                    v = v * stdev[static_cast<size_t>(std::min<size_t>(src, stdev.size() - 1))] +
                        mean[static_cast<size_t>(std::min<size_t>(src, mean.size() - 1))];
                    const int byte = static_cast<int>(std::lround(v * 255.0));
                    img.pixels[(static_cast<size_t>(i) * w + j) * img.channels + ch] =
                        static_cast<uint8_t>(std::clamp(byte, 0, 255));
                }
        char name[32];
        std::snprintf(name, sizeof name, "%05d.png", counter[static_cast<size_t>(s.label)]++);
        io::write_png((dir / name).string(), img);
    }
}

} // namespace itcl
