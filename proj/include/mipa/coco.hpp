#pragma once

#include <string>
#include <vector>

#include "mipa/data_synth.hpp"

namespace mipa {

// Maps the visible-modality file path to its IR counterpart by substring
// substitution (e.g. "visible" -> "infrared").
struct PairingRule {
    std::string from = "visible";
    std::string to = "infrared";

    std::string apply(const std::string& path) const;
};

struct CocoLoadOptions {
    std::string root;            // directory the file_name entries are relative to
    std::string annotation_file; // COCO-format JSON
    PairingRule pairing;
    int resize_h = 0; // 0 keeps the source size
    int resize_w = 0;
};

struct LoadReport {
    int loaded = 0;
    int skipped_missing = 0;
    std::vector<std::string> messages;
};

struct CocoDataset {
    std::vector<PairedSample> samples;
    int num_classes = 0;
    std::vector<int> category_ids; // original COCO ids, index = contiguous class id
    LoadReport report;
};

// Loads aligned pairs with shared ground truth; boxes are rescaled to the
// target size and normalized to cxcywh. Missing counterpart images are
// skipped and logged; malformed annotations are rejected with context.
CocoDataset load_coco_pairs(const CocoLoadOptions& options);

// Writes a synthetic dataset in the same COCO layout (visible/ + infrared/
// PPM images plus annotations.json) so the loader round-trips.
void write_coco_dataset(const std::string& root, const std::vector<PairedSample>& samples,
                        int num_classes, const std::string& annotation_name = "annotations.json");

} // namespace mipa
