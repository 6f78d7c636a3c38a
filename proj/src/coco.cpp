#include "mipa/coco.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <stdexcept>

#include <json.hpp>

#include "mipa/image_io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace mipa {

std::string PairingRule::apply(const std::string& path) const {
    const auto pos = path.find(from);
    if (pos == std::string::npos) return path;
    std::string result = path;
    result.replace(pos, from.size(), to);
    return result;
}

namespace {

json parse_annotation_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open annotation file " + path);
    try {
        return json::parse(in);
    } catch (const json::parse_error& err) {
        throw std::runtime_error("malformed annotation file " + path + ": " + err.what());
    }
}

const json& require(const json& obj, const char* key, const std::string& context) {
    const auto it = obj.find(key);
    if (it == obj.end())
        throw std::runtime_error("malformed annotation: missing '" + std::string(key) + "' in " + context);
    return *it;
}

} // namespace

CocoDataset load_coco_pairs(const CocoLoadOptions& options) {
    CocoDataset dataset;
    const json root = parse_annotation_file(options.annotation_file);

    // Contiguous class ids in ascending COCO category order.
    std::map<int, int> category_to_class;
    for (const json& cat : require(root, "categories", options.annotation_file)) {
        const int id = require(cat, "id", "categories").get<int>();
        category_to_class.emplace(id, 0);
    }
    for (auto& [id, class_id] : category_to_class) {
        class_id = static_cast<int>(dataset.category_ids.size());
        dataset.category_ids.push_back(id);
    }
    dataset.num_classes = static_cast<int>(dataset.category_ids.size());

    struct ImageEntry {
        std::string file_name;
        int width = 0, height = 0;
        std::vector<BoundingBox> boxes;
    };
    std::map<std::int64_t, ImageEntry> images;
    for (const json& img : require(root, "images", options.annotation_file)) {
        ImageEntry entry;
        entry.file_name = require(img, "file_name", "images").get<std::string>();
        entry.width = require(img, "width", "images").get<int>();
        entry.height = require(img, "height", "images").get<int>();
        images[require(img, "id", "images").get<std::int64_t>()] = std::move(entry);
    }

    for (const json& ann : require(root, "annotations", options.annotation_file)) {
        const std::int64_t image_id = require(ann, "image_id", "annotations").get<std::int64_t>();
        const auto img_it = images.find(image_id);
        if (img_it == images.end())
            throw std::runtime_error("malformed annotation: unknown image_id " + std::to_string(image_id) +
                                     " in " + options.annotation_file);
        const json& bbox = require(ann, "bbox", "annotations");
        if (!bbox.is_array() || bbox.size() != 4)
            throw std::runtime_error("malformed annotation: bbox must be [x, y, w, h] in " +
                                     options.annotation_file);
        const int category = require(ann, "category_id", "annotations").get<int>();
        const auto cat_it = category_to_class.find(category);
        if (cat_it == category_to_class.end())
            throw std::runtime_error("malformed annotation: unknown category_id " + std::to_string(category));

        BoundingBox box;
        const double x = bbox[0].get<double>(), y = bbox[1].get<double>();
        const double w = bbox[2].get<double>(), h = bbox[3].get<double>();
        const ImageEntry& entry = img_it->second;
        box.cx = (x + w / 2.0) / entry.width;
        box.cy = (y + h / 2.0) / entry.height;
        box.w = w / entry.width;
        box.h = h / entry.height;
        box.class_id = cat_it->second;
        img_it->second.boxes.push_back(box);
    }

    for (const auto& [image_id, entry] : images) {
        const fs::path visible_path = fs::path(options.root) / entry.file_name;
        const fs::path ir_path = fs::path(options.root) / options.pairing.apply(entry.file_name);
        if (!fs::exists(visible_path) || !fs::exists(ir_path)) {
            ++dataset.report.skipped_missing;
            dataset.report.messages.push_back("skipped image_id " + std::to_string(image_id) +
                                              ": missing " +
                                              (fs::exists(visible_path) ? ir_path.string() : visible_path.string()));
            continue;
        }

        PairedSample sample;
        sample.scene_id = image_id;
        sample.image_g = read_ppm(visible_path.string());
        sample.image_f = read_ppm(ir_path.string());
        if (!sample.image_f.same_shape(sample.image_g))
            throw std::runtime_error("unaligned pair for image_id " + std::to_string(image_id) +
                                     ": modality shapes differ");
        if (options.resize_h > 0 && options.resize_w > 0 &&
            (sample.image_g.height != options.resize_h || sample.image_g.width != options.resize_w)) {
            sample.image_g = resize_bilinear(sample.image_g, options.resize_h, options.resize_w);
            sample.image_f = resize_bilinear(sample.image_f, options.resize_h, options.resize_w);
        }
        sample.gt.image_id = image_id;
        sample.gt.boxes = entry.boxes; // normalized; rescaling is implicit
        sample.objects_requested = sample.objects_placed = static_cast<int>(entry.boxes.size());
        dataset.samples.push_back(std::move(sample));
        ++dataset.report.loaded;
    }
    return dataset;
}

void write_coco_dataset(const std::string& root, const std::vector<PairedSample>& samples,
                        int num_classes, const std::string& annotation_name) {
    fs::create_directories(fs::path(root) / "visible");
    fs::create_directories(fs::path(root) / "infrared");

    json images = json::array();
    json annotations = json::array();
    long next_annotation_id = 1;
    for (const PairedSample& sample : samples) {
        char name[64];
        std::snprintf(name, sizeof(name), "scene_%06lld.ppm", static_cast<long long>(sample.scene_id));
        const std::string visible_rel = std::string("visible/") + name;
        const std::string ir_rel = std::string("infrared/") + name;
        write_ppm((fs::path(root) / visible_rel).string(), sample.image_g);
        write_ppm((fs::path(root) / ir_rel).string(), sample.image_f);

        images.push_back({{"id", sample.scene_id},
                          {"file_name", visible_rel},
                          {"width", sample.image_g.width},
                          {"height", sample.image_g.height}});
        for (const BoundingBox& box : sample.gt.boxes) {
            const double w = box.w * sample.image_g.width;
            const double h = box.h * sample.image_g.height;
            const double x = box.cx * sample.image_g.width - w / 2.0;
            const double y = box.cy * sample.image_g.height - h / 2.0;
            annotations.push_back({{"id", next_annotation_id++},
                                   {"image_id", sample.scene_id},
                                   {"category_id", box.class_id + 1},
                                   {"bbox", {x, y, w, h}},
                                   {"area", w * h},
                                   {"iscrowd", 0}});
        }
    }

    json categories = json::array();
    for (int c = 0; c < num_classes; ++c)
        categories.push_back({{"id", c + 1}, {"name", "class_" + std::to_string(c)}});

    const json root_json = {{"images", images}, {"annotations", annotations}, {"categories", categories}};
    std::ofstream out(fs::path(root) / annotation_name);
    out << root_json.dump(1);
}

} // namespace mipa
