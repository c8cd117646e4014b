#include "cwr/dataset_io.hpp"

#include <algorithm>
#include <cmath>

#include "cwr/checksum.hpp"
#include "cwr/model_io.hpp"
#include "cwr/random.hpp"

namespace cwr {

namespace {

std::uint8_t to_byte(float v) {
    return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
}

float quantize(double v) { return static_cast<float>(to_byte(static_cast<float>(v))) / 255.0f; }

std::vector<std::string> numbered_class_names(std::size_t n) {
    std::vector<std::string> names;
    for (std::size_t i = 0; i < n; ++i) names.push_back("C" + std::to_string(i + 1));
    return names;
}

}  // namespace

LabeledDataset parse_dataset_binary(std::span<const std::uint8_t> bytes, const Shape& image_shape,
                                    std::size_t num_classes) {
    const std::size_t pixels = shape_size(image_shape);
    const std::size_t record = pixels + 1;
    if (bytes.size() % record != 0)
        throw TruncatedFile(std::to_string(bytes.size()) + " bytes is not a multiple of the " +
                            std::to_string(record) + "-byte record");
    const std::size_t n = bytes.size() / record;

    LabeledDataset data;
    data.manifest.num_classes = num_classes;
    data.manifest.class_names = num_classes == 10 ? cifar10_class_names() : numbered_class_names(num_classes);
    data.manifest.count = n;
    data.manifest.image_shape = image_shape;
    data.manifest.source = DatasetSource::cifar_binary;
    data.manifest.checksum = crc32_hex(bytes);
    data.labels.resize(n);
    if (n == 0) return data;

    Shape shape = image_shape;
    shape.insert(shape.begin(), n);
    std::vector<float> pixels_out(n * pixels);
    for (std::size_t i = 0; i < n; ++i) {
        const std::uint8_t* rec = bytes.data() + i * record;
        if (rec[0] >= num_classes) throw LabelByteOutOfRange(i, rec[0]);
        data.labels[i] = rec[0];
        for (std::size_t k = 0; k < pixels; ++k) pixels_out[i * pixels + k] = static_cast<float>(rec[1 + k]) / 255.0f;
    }
    data.images = ImageBatch(std::move(shape), std::move(pixels_out));
    return data;
}

std::vector<std::uint8_t> serialize_dataset_binary(const LabeledDataset& data) {
    const std::size_t pixels = shape_size(data.manifest.image_shape);
    std::vector<std::uint8_t> out;
    out.reserve(data.size() * (pixels + 1));
    for (std::size_t i = 0; i < data.size(); ++i) {
        if (data.labels[i] < 0 || data.labels[i] > 255) throw LabelByteOutOfRange(i, data.labels[i]);
        out.push_back(static_cast<std::uint8_t>(data.labels[i]));
        for (float v : data.images.row(i)) out.push_back(to_byte(v));
    }
    return out;
}

LabeledDataset load_cifar_binary(const std::filesystem::path& path) {
    LabeledDataset data = parse_dataset_binary(read_file(path), kCifarImageShape, 10);
    data.manifest.name = path.filename().string();
    return data;
}

void save_dataset(const LabeledDataset& data, const std::filesystem::path& path) {
    const auto bytes = serialize_dataset_binary(data);
    DatasetManifest manifest = data.manifest;
    manifest.count = data.size();
    manifest.checksum = crc32_hex(bytes);
    write_file(path, bytes);
    write_text(path.string() + ".json", manifest.to_json().dump(2) + "\n");
}

LabeledDataset load_dataset(const std::filesystem::path& path) {
    const auto manifest_bytes = read_file(path.string() + ".json");
    DatasetManifest manifest;
    try {
        manifest = DatasetManifest::from_json(nlohmann::json::parse(manifest_bytes.begin(), manifest_bytes.end()));
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("dataset manifest: ") + e.what());
    }
    const auto bytes = read_file(path);
    if (!manifest.checksum.empty() && crc32_hex(bytes) != manifest.checksum)
        throw ChecksumMismatch("dataset payload '" + path.string() + "'");
    LabeledDataset data = parse_dataset_binary(bytes, manifest.image_shape, manifest.num_classes);
    if (data.size() != manifest.count)
        throw TruncatedFile("manifest promises " + std::to_string(manifest.count) + " records, payload has " +
                            std::to_string(data.size()));
    data.manifest = manifest;
    return data;
}

std::vector<std::vector<float>> synthetic_templates(const SyntheticSpec& spec) {
    if (spec.image_shape.size() != 3) throw InvalidConfig("synthetic images must be (channel, height, width)");
    if (spec.num_classes == 0) throw InvalidConfig("synthetic dataset needs at least one class");
    if (!(spec.separation >= 0.0)) throw InvalidConfig("separation must be non-negative");
    if (spec.separation > 1.0)
        throw InfeasibleSeparation("max-norm distance in [0,1] cannot exceed 1, asked for " +
                                   std::to_string(spec.separation));
    const std::size_t channels = spec.image_shape[0], height = spec.image_shape[1], width = spec.image_shape[2];
    const std::size_t block = std::max<std::size_t>(1, spec.block);
    const std::size_t by = (height + block - 1) / block, bx = (width + block - 1) / block;
    const double radius = std::min(0.5, spec.separation);

    Rng rng(derive_seed(spec.seed, 0));
    std::vector<std::vector<float>> templates;
    constexpr int kAttempts = 1000;
    for (std::size_t k = 0; k < spec.num_classes; ++k) {
        bool placed = false;
        for (int attempt = 0; attempt < kAttempts && !placed; ++attempt) {
            std::vector<float> coarse(channels * by * bx);
            for (auto& v : coarse) v = quantize(0.5 + rng.uniform(-radius, radius));
            std::vector<float> t(channels * height * width);
            for (std::size_t c = 0; c < channels; ++c)
                for (std::size_t y = 0; y < height; ++y)
                    for (std::size_t x = 0; x < width; ++x)
                        t[(c * height + y) * width + x] = coarse[(c * by + y / block) * bx + x / block];
            placed = std::all_of(templates.begin(), templates.end(), [&](const std::vector<float>& other) {
                float dist = 0.0f;
                for (std::size_t i = 0; i < t.size(); ++i) dist = std::max(dist, std::abs(t[i] - other[i]));
                return dist + 1e-6 >= spec.separation;
            });
            if (placed) templates.push_back(std::move(t));
        }
        if (!placed)
            throw InfeasibleSeparation("could not place template " + std::to_string(k) + " at separation " +
                                       std::to_string(spec.separation));
    }
    return templates;
}

LabeledDataset generate_synthetic(const SyntheticSpec& spec) {
    if (!(spec.noise >= 0.0)) throw InvalidConfig("noise must be non-negative");
    const auto templates = synthetic_templates(spec);
    const std::size_t n = spec.num_classes * spec.per_class;
    const std::size_t pixels = shape_size(spec.image_shape);

    LabeledDataset data;
    data.manifest.name = "synthetic";
    data.manifest.num_classes = spec.num_classes;
    data.manifest.class_names = spec.num_classes == 10 ? cifar10_class_names() : numbered_class_names(spec.num_classes);
    data.manifest.count = n;
    data.manifest.image_shape = spec.image_shape;
    data.manifest.source = DatasetSource::synthetic;
    data.manifest.seed = spec.seed;
    data.labels.resize(n);
    if (n == 0) return data;

    std::vector<float> pixels_out(n * pixels);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t label = i % spec.num_classes;
        data.labels[i] = static_cast<int>(label);
        Rng rng(derive_seed(derive_seed(spec.seed, 1 + spec.split), i));
        for (std::size_t k = 0; k < pixels; ++k)
            pixels_out[i * pixels + k] = quantize(templates[label][k] + spec.noise * rng.normal());
    }
    Shape shape = spec.image_shape;
    shape.insert(shape.begin(), n);
    data.images = ImageBatch(std::move(shape), std::move(pixels_out));
    data.manifest.checksum = crc32_hex(serialize_dataset_binary(data));
    return data;
}

}  // namespace cwr
