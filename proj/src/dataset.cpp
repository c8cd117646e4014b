#include "cwr/dataset.hpp"

#include "cwr/errors.hpp"

namespace cwr {

std::string_view to_string(DatasetSource source) {
    switch (source) {
        case DatasetSource::cifar_binary: return "cifar_binary";
        case DatasetSource::synthetic: return "synthetic";
        case DatasetSource::archive: return "archive";
    }
    return "unknown";
}

DatasetSource parse_dataset_source(std::string_view name) {
    for (auto s : {DatasetSource::cifar_binary, DatasetSource::synthetic, DatasetSource::archive})
        if (to_string(s) == name) return s;
    throw InvalidConfig("unknown dataset source '" + std::string(name) + "'");
}

const std::vector<std::string>& cifar10_class_names() {
    static const std::vector<std::string> names{"airplane", "automobile", "bird",  "cat",  "deer",
                                                "dog",      "frog",       "horse", "ship", "truck"};
    return names;
}

nlohmann::json DatasetManifest::to_json() const {
    nlohmann::json j{{"name", name},
            {"num_classes", num_classes},
            {"class_names", class_names},
            {"count", count},
            {"image_shape", image_shape},
            {"source", to_string(source)},
            {"seed", seed},
            {"checksum", checksum}};
    if (!provenance.is_null()) j["provenance"] = provenance;
    return j;
}

DatasetManifest DatasetManifest::from_json(const nlohmann::json& j) {
    try {
        DatasetManifest m;
        m.name = j.at("name").get<std::string>();
        m.num_classes = j.at("num_classes").get<std::size_t>();
        m.class_names = j.at("class_names").get<std::vector<std::string>>();
        m.count = j.at("count").get<std::size_t>();
        m.image_shape = j.at("image_shape").get<Shape>();
        m.source = parse_dataset_source(j.at("source").get<std::string>());
        m.seed = j.value("seed", std::uint64_t{0});
        m.checksum = j.value("checksum", std::string{});
        if (j.contains("provenance")) m.provenance = j.at("provenance");
        if (m.class_names.size() != m.num_classes)
            throw InvalidConfig("manifest lists " + std::to_string(m.class_names.size()) + " class names for " +
                                std::to_string(m.num_classes) + " classes");
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw InvalidConfig(std::string("dataset manifest: ") + e.what());
    }
}

void LabeledDataset::validate() const {
    if (manifest.class_names.size() != manifest.num_classes)
        throw InvalidConfig("class-name list length differs from class count");
    if (manifest.count != labels.size()) throw InvalidConfig("manifest count differs from label count");
    if (!labels.empty()) {
        Shape expected = manifest.image_shape;
        expected.insert(expected.begin(), labels.size());
        if (images.shape() != expected)
            throw InvalidConfig("image tensor " + shape_string(images.shape()) + " expected " + shape_string(expected));
    }
    for (std::size_t i = 0; i < labels.size(); ++i)
        if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= manifest.num_classes)
            throw LabelOutOfRange("label " + std::to_string(labels[i]) + " at sample " + std::to_string(i));
}

}  // namespace cwr
