#include "cwr/model_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "cwr/checksum.hpp"

namespace cwr {

namespace {

constexpr char kMagic[4] = {'C', 'W', 'R', 'M'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(const std::uint8_t* p) {
    return static_cast<std::uint32_t>(p[0]) | static_cast<std::uint32_t>(p[1]) << 8 |
           static_cast<std::uint32_t>(p[2]) << 16 | static_cast<std::uint32_t>(p[3]) << 24;
}

void put_tensor(std::vector<std::uint8_t>& blob, const Tensor<float>& t) {
    for (float v : t.storage()) put_u32(blob, std::bit_cast<std::uint32_t>(v));
}

}  // namespace

nlohmann::json layer_to_json(const LayerSpec& l) {
    nlohmann::json j;
    j["kind"] = to_string(l.kind);
    switch (l.kind) {
        case LayerKind::conv2d:
            j["out_channels"] = l.out_channels;
            j["kernel"] = {l.kernel_h, l.kernel_w};
            j["stride"] = l.stride;
            j["padding"] = l.padding;
            break;
        case LayerKind::dense: j["out_features"] = l.out_features; break;
        case LayerKind::maxpool2d:
        case LayerKind::avgpool2d:
            j["kernel"] = {l.kernel_h, l.kernel_w};
            j["stride"] = l.stride;
            break;
        default: break;
    }
    return j;
}

LayerSpec layer_from_json(const nlohmann::json& j) {
    LayerSpec l;
    l.kind = parse_layer_kind(j.at("kind").get<std::string>());
    if (j.contains("kernel")) {
        l.kernel_h = j.at("kernel").at(0).get<std::size_t>();
        l.kernel_w = j.at("kernel").at(1).get<std::size_t>();
    }
    l.out_channels = j.value("out_channels", std::size_t{0});
    l.stride = j.value("stride", std::size_t{1});
    l.padding = j.value("padding", std::size_t{0});
    l.out_features = j.value("out_features", std::size_t{0});
    return l;
}

std::vector<std::uint8_t> serialize_model(const Model& model) {
    infer_shapes(model);

    std::vector<std::uint8_t> blob;
    blob.reserve(model.parameter_count() * 4);
    nlohmann::json tensors = nlohmann::json::array();
    for (std::size_t i = 0; i < model.layers.size(); ++i) {
        const auto& p = model.params[i];
        if (p.empty()) continue;
        const std::pair<const char*, const Tensor<float>*> parts[] = {{"weight", &p.weight}, {"bias", &p.bias}};
        for (const auto& [role, t] : parts) {
            tensors.push_back({{"layer", i},
                               {"role", role},
                               {"shape", t->shape()},
                               {"offset", blob.size()},
                               {"size", t->size() * 4}});
            put_tensor(blob, *t);
        }
    }

    nlohmann::json header;
    header["format_version"] = kModelFormatVersion;
    header["name"] = model.name;
    header["regime"] = to_string(model.regime);
    header["seed"] = model.seed;
    header["num_classes"] = model.num_classes;
    header["input_shape"] = model.input_shape;
    header["layers"] = nlohmann::json::array();
    for (const auto& l : model.layers) header["layers"].push_back(layer_to_json(l));
    header["tensors"] = tensors;
    header["blob_size"] = blob.size();
    header["blob_checksum"] = crc32_hex(blob);

    const std::string text = header.dump();
    std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
    put_u32(out, static_cast<std::uint32_t>(text.size()));
    out.insert(out.end(), text.begin(), text.end());
    out.insert(out.end(), blob.begin(), blob.end());
    return out;
}

nlohmann::json read_model_header(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 8 || std::memcmp(bytes.data(), kMagic, 4) != 0)
        throw FormatError("not a model container (bad magic)");
    const std::uint32_t len = get_u32(bytes.data() + 4);
    if (bytes.size() < 8 + static_cast<std::size_t>(len)) throw TruncatedFile("model header");
    try {
        return nlohmann::json::parse(bytes.begin() + 8, bytes.begin() + 8 + len);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("model header: ") + e.what());
    }
}

Model deserialize_model(std::span<const std::uint8_t> bytes) {
    const nlohmann::json header = read_model_header(bytes);
    const int version = header.value("format_version", -1);
    if (version != kModelFormatVersion) throw VersionUnsupported(version);

    const std::size_t blob_start = 8 + get_u32(bytes.data() + 4);
    const auto blob = bytes.subspan(blob_start);
    if (blob.size() != header.at("blob_size").get<std::size_t>())
        throw TruncatedFile("model blob is " + std::to_string(blob.size()) + " bytes, header says " +
                            std::to_string(header.at("blob_size").get<std::size_t>()));
    if (crc32_hex(blob) != header.at("blob_checksum").get<std::string>())
        throw ChecksumMismatch("model parameter blob");

    Model model;
    try {
        model.name = header.at("name").get<std::string>();
        model.regime = parse_regime(header.at("regime").get<std::string>());
        model.seed = header.at("seed").get<std::uint64_t>();
        model.num_classes = header.at("num_classes").get<std::size_t>();
        model.input_shape = header.at("input_shape").get<Shape>();
        for (const auto& l : header.at("layers")) model.layers.push_back(layer_from_json(l));
        model.params.resize(model.layers.size());
        for (const auto& t : header.at("tensors")) {
            const std::size_t layer = t.at("layer").get<std::size_t>();
            const std::size_t offset = t.at("offset").get<std::size_t>();
            const std::size_t size = t.at("size").get<std::size_t>();
            const Shape shape = t.at("shape").get<Shape>();
            if (layer >= model.layers.size() || offset + size > blob.size() || size != shape_size(shape) * 4)
                throw FormatError("model tensor table is inconsistent");
            std::vector<float> values(size / 4);
            for (std::size_t k = 0; k < values.size(); ++k)
                values[k] = std::bit_cast<float>(get_u32(blob.data() + offset + 4 * k));
            Tensor<float> tensor(shape, std::move(values));
            if (t.at("role").get<std::string>() == "weight")
                model.params[layer].weight = std::move(tensor);
            else
                model.params[layer].bias = std::move(tensor);
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("model header: ") + e.what());
    }
    infer_shapes(model);
    return model;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed for '" + path.string() + "'");
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    write_file(path, std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

void save_model(const Model& model, const std::filesystem::path& path) { write_file(path, serialize_model(model)); }

Model load_model(const std::filesystem::path& path) { return deserialize_model(read_file(path)); }

std::string model_hash(const Model& model) { return crc32_hex(serialize_model(model)); }

}  // namespace cwr
