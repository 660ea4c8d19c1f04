#pragma once

#include "sdm/net.hpp"

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace sdm {

struct Dataset {
    std::vector<LabeledExample> examples;
    std::size_t k = 0; // label count; labels are 1..k
    std::size_t d = 0;
    std::string name;

    std::size_t size() const { return examples.size(); }
    void validate() const; // throws on broken invariants
};

// IDX: big-endian u32 magic 0x00000803 (images: count, rows, cols) /
// 0x00000801 (labels: count), then raw u8 payload. Pixels scale to [0,1] by
// /255; stored labels are 0-based and shift to 1-based.
Dataset load_idx(const std::string& images_path, const std::string& labels_path);

// Fixture writer; payload bytes round-trip exactly through load_idx.
void write_idx(const std::string& images_path, const std::string& labels_path,
               std::uint32_t count, std::uint32_t rows, std::uint32_t cols,
               const std::vector<std::uint8_t>& pixels,
               const std::vector<std::uint8_t>& labels);
void write_idx(const Dataset& ds, const std::string& images_path,
               const std::string& labels_path, std::uint32_t rows, std::uint32_t cols);

// Rows of "label,v1,...,vd" with values in [0,1]; d fixed by the first row.
Dataset load_csv(const std::string& path);

// K gaussian clusters in [0,1]^d (centers drawn in [0.2,0.8]^d, clipped
// points), deterministic per seed. Examples are ordered class-major.
Dataset make_synthetic_blobs(std::size_t k, std::size_t d, std::size_t per_class,
                             double spread, std::uint64_t seed);

// First n_train examples of every class go to the first dataset, the rest to
// the second. Requires class-major ordering (as produced by the blob maker).
std::pair<Dataset, Dataset> split_per_class(const Dataset& ds, std::size_t n_train);

// "blobs:k=..,d=..,per_class=..,spread=..,seed=..", "idx:<images>,<labels>",
// "csv:<path>" or a bare path ending in .csv.
Dataset parse_dataset_spec(const std::string& spec);

} // namespace sdm
