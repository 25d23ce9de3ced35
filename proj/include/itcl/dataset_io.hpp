#pragma once

#include <string>
#include <vector>

#include "itcl/task_stream.hpp"

namespace itcl {

// Directory layout: root/<split>/<class_name>/<file>.png with split in
// {train, test}, plus a manifest.json naming the class list, the source id
// and the per-channel normalization (mean/std in [0,1] pixel units).
// Images are normalized on load so transforms operate in normalized space.
LabeledDataset load_directory_dataset(const std::string& root);

// Writes a dataset in the same layout (figures/fixtures; values are
// de-normalized and clipped to 8-bit).
void save_directory_dataset(const std::string& root, const LabeledDataset& ds,
                            const std::vector<double>& mean, const std::vector<double>& stdev);

} // namespace itcl
