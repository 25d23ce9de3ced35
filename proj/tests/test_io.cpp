#include <doctest.h>

#include <zlib.h>

#include <cstdio>
#include <filesystem>
#include <random>

#include "helpers.hpp"
#include "itcl/dataset_io.hpp"
#include "itcl/io/checkpoint.hpp"
#include "itcl/io/png.hpp"

using namespace itcl;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

} // namespace

TEST_CASE("png round trip for gray and rgb") {
    std::mt19937_64 rng(61);
    for (const int channels : {1, 3}) {
        io::Image8 img;
        img.width = 13;
        img.height = 9;
        img.channels = channels;
        img.pixels.resize(static_cast<size_t>(13 * 9 * channels));
        for (auto& p : img.pixels) p = static_cast<uint8_t>(rng() & 0xff);
        const io::Image8 back = io::decode_png(io::encode_png(img));
        CHECK(back.width == img.width);
        CHECK(back.height == img.height);
        CHECK(back.channels == img.channels);
        CHECK(back.pixels == img.pixels);
    }
}

TEST_CASE("png decoder handles all five filter types") {
    // build a 4x3 RGB image compressed with a chosen filter per scanline
    const int w = 4, h = 3, bpp = 3;
    std::mt19937_64 rng(62);
    std::vector<uint8_t> pixels(static_cast<size_t>(w * h * bpp));
    for (auto& p : pixels) p = static_cast<uint8_t>(rng() & 0xff);

    auto paeth = [](int a, int b, int c) {
        const int p = a + b - c, pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
        if (pa <= pb && pa <= pc) return a;
        if (pb <= pc) return b;
        return c;
    };
    for (const int filter : {0, 1, 2, 3, 4}) {
        std::vector<uint8_t> raw;
        for (int y = 0; y < h; ++y) {
            raw.push_back(static_cast<uint8_t>(filter));
            for (int x = 0; x < w * bpp; ++x) {
                const int cur = pixels[static_cast<size_t>(y * w * bpp + x)];
                const int a = x >= bpp ? pixels[static_cast<size_t>(y * w * bpp + x - bpp)] : 0;
                const int b = y > 0 ? pixels[static_cast<size_t>((y - 1) * w * bpp + x)] : 0;
                const int c =
                    (y > 0 && x >= bpp) ? pixels[static_cast<size_t>((y - 1) * w * bpp + x - bpp)]
                                        : 0;
                int v = cur;
                switch (filter) {
                    case 1: v = cur - a; break;
                    case 2: v = cur - b; break;
                    case 3: v = cur - (a + b) / 2; break;
                    case 4: v = cur - paeth(a, b, c); break;
                }
                raw.push_back(static_cast<uint8_t>(v & 0xff));
            }
        }
        uLongf clen = compressBound(static_cast<uLong>(raw.size()));
        std::vector<uint8_t> comp(clen);
        REQUIRE(compress2(comp.data(), &clen, raw.data(), static_cast<uLong>(raw.size()), 6) ==
                Z_OK);
        comp.resize(clen);

        // wrap in minimal chunks by reusing the encoder on a dummy image and
        // splicing our IDAT is brittle; build the byte stream directly instead
        std::vector<uint8_t> bytes = {0x89, 'P', 'N', 'G', 0x0d, 0x0a, 0x1a, 0x0a};
        auto put_chunk = [&bytes](const char type[4], const std::vector<uint8_t>& payload) {
            auto put32 = [&bytes](uint32_t v) {
                bytes.push_back(static_cast<uint8_t>(v >> 24));
                bytes.push_back(static_cast<uint8_t>(v >> 16));
                bytes.push_back(static_cast<uint8_t>(v >> 8));
                bytes.push_back(static_cast<uint8_t>(v));
            };
            put32(static_cast<uint32_t>(payload.size()));
            const size_t start = bytes.size();
            bytes.insert(bytes.end(), type, type + 4);
            bytes.insert(bytes.end(), payload.begin(), payload.end());
            const uint32_t crc = static_cast<uint32_t>(
                crc32(0L, bytes.data() + start, static_cast<uInt>(bytes.size() - start)));
            put32(crc);
        };
        std::vector<uint8_t> ihdr = {0, 0, 0, static_cast<uint8_t>(w),
                                     0, 0, 0, static_cast<uint8_t>(h),
                                     8, 2, 0, 0, 0};
        put_chunk("IHDR", ihdr);
        put_chunk("IDAT", comp);
        put_chunk("IEND", {});

        const io::Image8 img = io::decode_png(bytes);
        CHECK(img.pixels == pixels);
    }
}

TEST_CASE("checkpoint container round trip") {
    TempDir dir("itcl_ckpt_test");
    io::Checkpoint c;
    c.meta = {{"kind", "probe"}, {"value", 3}};
    c.put("a", {2, 3}, {1, 2, 3, 4, 5, 6});
    c.put("b", {4}, {-1, 0, 1, 2.5});
    const std::string path = (dir.path / "probe.ckpt").string();
    c.save(path);
    const io::Checkpoint back = io::Checkpoint::load(path);
    CHECK(back.meta.at("value") == 3);
    CHECK(back.get("a") == std::vector<double>{1, 2, 3, 4, 5, 6});
    CHECK(back.shape("a") == std::vector<int>{2, 3});
    CHECK(back.get("b")[3] == 2.5);
    CHECK_THROWS_AS(back.get("missing"), CheckpointMissing);
    CHECK_THROWS_AS(io::Checkpoint::load((dir.path / "absent.ckpt").string()),
                    CheckpointMissing);
}

TEST_CASE("assembly checkpoint: stable keys, bit-exact state round trip") {
    TempDir dir("itcl_asm_ckpt");
    std::mt19937_64 rng(63);

    BackboneConfig cfg;
    cfg.input_side = 16;
    Backbone bb = Backbone::make(cfg, 9);
    TuningStrategy s;
    s.kind = StrategyKind::it_pad;
    s.transform.kind = TransformKind::pad;
    s.transform.thickness = 2;
    s.transform_mode = TransformMode::per_task;
    Assembly a = Assembly::assemble(std::move(bb), 6, s, 17);
    a.head.register_session(1, {0, 1, 2});
    a.set_active_transform(a.ensure_task_transform(1));
    for (double& v : a.transform(0).theta.value.data) v = 0.125;

    const std::string path = (dir.path / "asm.ckpt").string();
    io::save_assembly(path, a, {{"session", 1}});
    Assembly b = io::load_assembly(path);

    CHECK(b.head.sessions_registered() == 1);
    CHECK(b.head.slice(1) == std::vector<int>{0, 1, 2});
    CHECK(b.transform_count() == 1);
    CHECK(b.transform(0).owner_task == 1);
    CHECK(b.snapshot_parameters("all") == a.snapshot_parameters("all"));
    CHECK(b.snapshot_bn_buffers() == a.snapshot_bn_buffers());

    auto x = testutil::random_tensor({2, 3, b.expected_input_side(), b.expected_input_side()},
                                     rng);
    CHECK(b.forward_logits(x, false).data == a.forward_logits(x, false).data);
}

TEST_CASE("dataset directory layout round trip") {
    TempDir dir("itcl_ds_dir");
    LabeledDataset ds = make_synthetic_dataset(3, 6, {3, 8, 8}, 64);
    // tag splits so the writer emits both subdirectories
    for (size_t i = 0; i < ds.samples.size(); ++i)
        ds.samples[i].split = i % 3 == 0 ? Split::test : Split::train;
    ds.source_id = "fixture";
    save_directory_dataset(dir.path.string(), ds, {0.5, 0.5, 0.5}, {0.25, 0.25, 0.25});

    CHECK(fs::exists(dir.path / "manifest.json"));
    CHECK(fs::exists(dir.path / "train" / "class_0"));
    CHECK(fs::exists(dir.path / "test" / "class_0"));

    LabeledDataset back = load_directory_dataset(dir.path.string());
    CHECK(back.class_names == ds.class_names);
    CHECK(back.source_id == "fixture");
    CHECK(back.samples.size() == ds.samples.size());
    int train_count = 0, test_count = 0;
    for (const Sample& smp : back.samples) {
        CHECK(smp.image.shape == std::vector<int>{3, 8, 8});
        (smp.split == Split::train ? train_count : test_count)++;
    }
    CHECK(train_count == 12);
    CHECK(test_count == 6);
    // 8-bit quantization bounds the reconstruction error in normalized space
    // (std 0.25 -> one pixel step is 1/255/0.25 ≈ 0.0157)
    double worst = 0.0;
    for (const Sample& smp : back.samples) {
        // match by id ordering within class/split is not guaranteed; just
        // check value range sanity here
        for (double v : smp.image.data) {
            CHECK(v >= -2.0 - 1e-9);
            CHECK(v <= 2.0 + 1e-9);
        }
        (void)worst;
    }
    CHECK_THROWS_AS(load_directory_dataset((dir.path / "nope").string()), IoError);
}
