#include "cwr/cli.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "cwr/attacks.hpp"
#include "cwr/checksum.hpp"
#include "cwr/corruptions.hpp"
#include "cwr/dataset_io.hpp"
#include "cwr/metrics.hpp"
#include "cwr/model_io.hpp"
#include "cwr/parallel.hpp"
#include "cwr/prediction.hpp"
#include "cwr/report.hpp"
#include "cwr/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace cwr::cli {

int exit_code_for(Error::Category category) {
    switch (category) {
        case Error::Category::invalid_argument: return bad_args;
        case Error::Category::data: return data_error;
        case Error::Category::numeric: return numeric_failure;
        case Error::Category::io: return io_failure;
    }
    return io_failure;
}

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t");
    return std::string(s.substr(b, e - b + 1));
}

double parse_double(std::string_view text, const std::string& what) {
    const std::string s = trim(text);
    if (s.empty()) throw InvalidConfig(what + ": empty number");
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end != s.c_str() + s.size() || !std::isfinite(v)) throw InvalidConfig(what + ": '" + s + "' is not a number");
    return v;
}

std::uint64_t parse_u64(std::string_view text, const std::string& what) {
    const std::string s = trim(text);
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size())
        throw InvalidConfig(what + ": '" + s + "' is not a non-negative integer");
    return v;
}

Shape parse_shape(std::string_view text) {
    Shape shape;
    std::size_t start = 0;
    while (start <= text.size()) {
        const auto x = text.find('x', start);
        const auto part = text.substr(start, x == std::string_view::npos ? std::string_view::npos : x - start);
        shape.push_back(parse_u64(part, "shape"));
        if (x == std::string_view::npos) break;
        start = x + 1;
    }
    return shape;
}

std::vector<std::string> split(std::string_view text, char sep) {
    std::vector<std::string> parts;
    std::size_t start = 0;
    while (true) {
        const auto p = text.find(sep, start);
        parts.push_back(std::string(text.substr(start, p == std::string_view::npos ? std::string_view::npos : p - start)));
        if (p == std::string_view::npos) break;
        start = p + 1;
    }
    return parts;
}

}  // namespace

double parse_epsilon(std::string_view text) {
    const auto slash = text.find('/');
    double v;
    if (slash == std::string_view::npos) {
        v = parse_double(text, "epsilon");
    } else {
        const double num = parse_double(text.substr(0, slash), "epsilon numerator");
        const double den = parse_double(text.substr(slash + 1), "epsilon denominator");
        if (den == 0.0) throw InvalidConfig("epsilon: zero denominator in '" + std::string(text) + "'");
        v = num / den;
    }
    if (!(v >= 0.0) || !std::isfinite(v)) throw InvalidConfig("epsilon must be finite and >= 0");
    return v;
}

namespace {

SyntheticSpec parse_synthetic(std::string_view body) {
    SyntheticSpec spec;
    if (trim(body).empty()) return spec;
    for (const auto& item : split(body, ',')) {
        const auto eq = item.find('=');
        if (eq == std::string::npos) throw InvalidConfig("--data: expected key=value, got '" + item + "'");
        const std::string key = trim(std::string_view(item).substr(0, eq));
        const std::string value = trim(std::string_view(item).substr(eq + 1));
        if (key == "classes") spec.num_classes = parse_u64(value, "classes");
        else if (key == "per_class") spec.per_class = parse_u64(value, "per_class");
        else if (key == "shape") spec.image_shape = parse_shape(value);
        else if (key == "sep") spec.separation = parse_double(value, "sep");
        else if (key == "noise") spec.noise = parse_double(value, "noise");
        else if (key == "block") spec.block = parse_u64(value, "block");
        else if (key == "seed") spec.seed = parse_u64(value, "seed");
        else if (key == "split") {
            if (value == "train") spec.split = 0;
            else if (value == "test") spec.split = 1;
            else spec.split = parse_u64(value, "split");
        } else {
            throw InvalidConfig("--data: unknown synthetic key '" + key + "'");
        }
    }
    return spec;
}

}  // namespace

LabeledDataset load_data(std::string_view spec) {
    if (spec.starts_with("synthetic:") || spec == "synthetic")
        return generate_synthetic(parse_synthetic(spec.size() > 10 ? spec.substr(10) : std::string_view{}));
    if (spec.starts_with("cifar:")) return load_cifar_binary(fs::path(std::string(spec.substr(6))));
    return load_dataset(fs::path(std::string(spec)));
}

namespace {

// ---------------------------------------------------------------------------
// Shared plumbing

struct Common {
    std::string config;
    unsigned threads = 1;
    std::uint64_t seed = 0;
};

void add_common(CLI::App* sub, Common& c) {
    sub->add_option("--config", c.config, "JSON file supplying flag values; command-line flags take precedence");
    sub->add_option("--threads", c.threads, "Worker threads for batch-parallel work")
        ->check(CLI::Range(1u, 256u))
        ->capture_default_str();
    sub->add_option("--seed", c.seed, "Global seed")->capture_default_str();
}

std::string json_to_flag_text(const json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    return v.dump();
}

// Fills every option of `sub` that was not given on the command line from the
// config object. Keys are long flag names without dashes; a nested object
// named after the subcommand overrides the top-level keys.
void apply_config(CLI::App* sub, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read config '" + path + "'");
    json cfg;
    try {
        cfg = json::parse(in);
    } catch (const json::exception& e) {
        throw InvalidConfig("config '" + path + "': " + e.what());
    }
    if (!cfg.is_object()) throw InvalidConfig("config '" + path + "' must hold a JSON object");

    auto apply = [&](const json& block, const std::string& where) {
        for (const auto& [key, value] : block.items()) {
            if (value.is_object()) continue;
            if (key == "config") throw InvalidConfig(where + ": nested config files are not supported");
            CLI::Option* opt = sub->get_option_no_throw("--" + key);
            if (!opt) throw InvalidConfig(where + ": '" + key + "' is not a flag of '" + sub->get_name() + "'");
            if (opt->count() > 0) continue;
            if (value.is_array()) {
                for (const auto& v : value) opt->add_result(json_to_flag_text(v));
            } else {
                opt->add_result(json_to_flag_text(value));
            }
            opt->run_callback();
        }
    };
    if (cfg.contains(sub->get_name())) {
        const json& block = cfg.at(sub->get_name());
        if (!block.is_object()) throw InvalidConfig("config block '" + sub->get_name() + "' must be an object");
        apply(block, "config block '" + sub->get_name() + "'");
    }
    json top = json::object();
    for (const auto& [key, value] : cfg.items())
        if (!value.is_object()) top[key] = value;
    apply(top, "config");
}

void require(const std::string& value, const std::string& flag) {
    if (value.empty()) throw InvalidConfig(flag + " is required");
}

json data_identity(const std::string& spec, const LabeledDataset& data) {
    json j;
    if (spec.starts_with("synthetic")) {
        j["spec"] = spec;
    } else {
        const auto colon = spec.starts_with("cifar:") ? std::string("cifar:") : std::string();
        j["spec"] = colon + fs::path(spec.substr(colon.size())).filename().string();
    }
    j["count"] = data.size();
    j["checksum"] = crc32_hex(serialize_dataset_binary(data));
    return j;
}

json model_identity(const Model& model, const std::string& hash) {
    return {{"preset", model.name}, {"regime", to_string(model.regime)}, {"seed", model.seed}, {"hash", hash}};
}

std::vector<std::string> class_names_for(const LabeledDataset& data) { return data.manifest.class_names; }

void check_compatible(const Model& model, const LabeledDataset& data) {
    if (model.num_classes != data.num_classes())
        throw SampleMismatch("model has " + std::to_string(model.num_classes) + " classes, data has " +
                             std::to_string(data.num_classes()));
    if (data.size() > 0 && model.input_shape != data.manifest.image_shape)
        throw SampleMismatch("model input " + shape_string(model.input_shape) + " differs from data images " +
                             shape_string(data.manifest.image_shape));
}

std::string predictions_csv(const PredictionSet& preds, const std::vector<float>* perturbation,
                            const std::vector<bool>* success) {
    std::ostringstream out;
    out << "index,truth,predicted";
    if (perturbation) out << ",perturbation";
    if (success) out << ",success";
    out << '\n';
    for (std::size_t i = 0; i < preds.size(); ++i) {
        out << i << ',' << preds.truth[i] << ',' << preds.predicted[i];
        if (perturbation) out << ',' << format_number((*perturbation)[i]);
        if (success) out << ',' << ((*success)[i] ? 1 : 0);
        out << '\n';
    }
    return out.str();
}

struct Loaded {
    Model model;
    std::string hash;
};

Loaded load_model_checked(const std::string& path) {
    Loaded l{load_model(path), {}};
    l.hash = crc32_hex(read_file(path));
    return l;
}

ClasswiseReport build_report(const PredictionSet& preds, const LabeledDataset& data, json provenance) {
    ClasswiseReport report = make_report(preds, class_names_for(data));
    json merged = preds.provenance;
    for (const auto& [k, v] : provenance.items()) merged[k] = v;
    report.provenance = merged;
    return report;
}

struct SimilarityTable {
    std::vector<double> matrix;
    json to_json;
};

SimilarityTable similarity_table(const std::vector<PredictionSet>& sets, const std::vector<json>& models,
                                 SimilarityMode mode) {
    const std::size_t m = sets.size();
    SimilarityTable t;
    t.matrix.assign(m * m, 0.0);
    json pairs = json::array();
    for (std::size_t a = 0; a < m; ++a)
        for (std::size_t b = 0; b < m; ++b) {
            t.matrix[a * m + b] = prediction_similarity(sets[a], sets[b], mode);
            if (a < b) pairs.push_back({{"a", a}, {"b", b}, {"similarity", t.matrix[a * m + b]}});
        }
    json rows = json::array();
    for (std::size_t a = 0; a < m; ++a)
        rows.push_back(std::vector<double>(t.matrix.begin() + a * m, t.matrix.begin() + (a + 1) * m));
    t.to_json = {{"mode", to_string(mode)}, {"models", models}, {"matrix", rows}, {"pairs", pairs}};
    return t;
}

void write_similarity(const SimilarityTable& t, std::size_t m, const fs::path& dir, const std::string& stem) {
    std::vector<std::string> names;
    for (std::size_t i = 0; i < m; ++i) names.push_back("m" + std::to_string(i));
    write_text(dir / (stem + ".json"), canonical_json(t.to_json));
    write_text(dir / (stem + ".csv"), grid_csv(t.matrix, names, names, "model"));
    write_text(dir / (stem + "_heatmap.svg"),
               svg_heatmap("Prediction similarity", names, names, t.matrix, false));
}

SimilarityMode similarity_flag(const std::string& s) { return parse_similarity_mode(s); }

// ---------------------------------------------------------------------------
// train

struct TrainArgs {
    Common common;
    std::string preset, data, eval_data, out, trace, regime = "standard", eps = "8/255", step_size = "2/255";
    std::size_t epochs = 10, batch_size = 32, eps_warmup = 0;
    double lr = 0.05, momentum = 0.9, weight_decay = 0.0;
    int steps = 7;
    bool augment = false, no_lr_decay = false, no_random_start = false;
};

void add_train(CLI::App& app, TrainArgs& a) {
    auto* sub = app.add_subcommand("train", "Train a preset model and write the model container plus a trace CSV");
    add_common(sub, a.common);
    sub->add_option("--preset", a.preset, "Architecture preset")->check(CLI::IsMember(preset_names()));
    sub->add_option("--data", a.data, "Training data (synthetic:..., cifar:PATH or a saved dataset)");
    sub->add_option("--eval-data", a.eval_data, "Held-out data evaluated after every epoch");
    sub->add_option("--out", a.out, "Model container to write");
    sub->add_option("--trace", a.trace, "Trace CSV (default: <out>.trace.csv)");
    sub->add_option("--regime", a.regime, "standard or adversarial")
        ->check(CLI::IsMember({"standard", "adversarial"}))
        ->capture_default_str();
    sub->add_option("--epochs", a.epochs)->capture_default_str();
    sub->add_option("--batch-size", a.batch_size)->capture_default_str();
    sub->add_option("--lr", a.lr, "Initial learning rate")->capture_default_str();
    sub->add_option("--momentum", a.momentum)->capture_default_str();
    sub->add_option("--weight-decay", a.weight_decay)->capture_default_str();
    sub->add_flag("--augment", a.augment, "Random horizontal flips");
    sub->add_flag("--no-lr-decay", a.no_lr_decay, "Keep the learning rate constant");
    sub->add_option("--eps", a.eps, "Adversarial training budget, fraction or decimal")->capture_default_str();
    sub->add_option("--steps", a.steps, "PGD steps during adversarial training")->capture_default_str();
    sub->add_option("--step-size", a.step_size, "PGD step size, fraction or decimal")->capture_default_str();
    sub->add_flag("--no-random-start", a.no_random_start, "Start PGD at the clean input");
    sub->add_option("--eps-warmup", a.eps_warmup, "Epochs over which the budget ramps up linearly")
        ->capture_default_str();
}

int cmd_train(const TrainArgs& a, std::ostream& out) {
    require(a.preset, "--preset");
    require(a.data, "--data");
    require(a.out, "--out");
    TrainConfig cfg;
    cfg.epochs = a.epochs;
    cfg.batch_size = a.batch_size;
    cfg.learning_rate = a.lr;
    cfg.momentum = a.momentum;
    cfg.weight_decay = a.weight_decay;
    cfg.augment = a.augment;
    cfg.lr_decay = !a.no_lr_decay;
    cfg.seed = a.common.seed;
    cfg.regime = parse_regime(a.regime);
    cfg.attack.epsilon = parse_epsilon(a.eps);
    cfg.attack.steps = a.steps;
    cfg.attack.step_size = parse_epsilon(a.step_size);
    cfg.attack.random_start = !a.no_random_start;
    cfg.epsilon_warmup = a.eps_warmup;
    cfg.validate();

    const LabeledDataset data = load_data(a.data);
    if (data.size() == 0) throw EmptyDataset();
    std::optional<LabeledDataset> eval;
    if (!a.eval_data.empty()) eval = load_data(a.eval_data);

    Model model = init_model(a.preset, data.num_classes(), data.manifest.image_shape, a.common.seed);
    const ExecPolicy policy{a.common.threads};
    TrainResult result = train(std::move(model), data, cfg, policy, eval ? &*eval : nullptr);

    save_model(result.model, a.out);
    const std::string trace_path = a.trace.empty() ? a.out + ".trace.csv" : a.trace;
    write_text(trace_path, trace_csv(result.trace));

    out << "trained " << a.preset << " (" << a.regime << ") for " << cfg.epochs << " epochs";
    for (const auto& row : result.trace)
        if (row.epoch == cfg.epochs) out << ", " << row.split << " accuracy " << format_number(row.accuracy);
    out << "\nmodel " << crc32_hex(read_file(a.out)) << " written to " << a.out << '\n';
    return ok;
}

// ---------------------------------------------------------------------------
// evaluate

struct EvaluateArgs {
    Common common;
    std::string model, data, out_dir = ".", stem = "clean", similarity = "one_hot";
    std::vector<std::string> compare;
    std::size_t batch_size = 100;
};

void add_evaluate(CLI::App& app, EvaluateArgs& a) {
    auto* sub = app.add_subcommand("evaluate", "Clean evaluation with the class-wise metric suite and figures");
    add_common(sub, a.common);
    sub->add_option("--model", a.model, "Model container");
    sub->add_option("--compare", a.compare, "Further models; pairwise prediction similarity is emitted");
    sub->add_option("--data", a.data, "Evaluation data");
    sub->add_option("--out-dir", a.out_dir)->capture_default_str();
    sub->add_option("--stem", a.stem, "Report file stem")->capture_default_str();
    sub->add_option("--similarity", a.similarity, "one_hot or recall_vector")
        ->check(CLI::IsMember({"one_hot", "recall_vector"}))
        ->capture_default_str();
    sub->add_option("--batch-size", a.batch_size)->check(CLI::PositiveNumber)->capture_default_str();
}

int cmd_evaluate(const EvaluateArgs& a, std::ostream& out) {
    std::vector<std::string> paths;
    if (!a.model.empty()) paths.push_back(a.model);
    paths.insert(paths.end(), a.compare.begin(), a.compare.end());
    if (paths.empty()) throw InvalidConfig("--model is required");
    require(a.data, "--data");

    const LabeledDataset data = load_data(a.data);
    if (data.size() == 0) throw EmptyDataset();
    const json data_id = data_identity(a.data, data);
    const ExecPolicy policy{a.common.threads};

    std::vector<PredictionSet> sets;
    std::vector<json> ids;
    for (std::size_t i = 0; i < paths.size(); ++i) {
        const Loaded l = load_model_checked(paths[i]);
        check_compatible(l.model, data);
        PredictionSet preds = evaluate(l.model, data, a.batch_size, policy);
        preds.model_hash = l.hash;
        const json id = model_identity(l.model, l.hash);
        const ClasswiseReport report =
            build_report(preds, data, {{"command", "evaluate"}, {"model", id}, {"data", data_id}});
        const std::string stem = i == 0 ? a.stem : a.stem + "_cmp" + std::to_string(i);
        write_report_files(report, a.out_dir, stem);
        out << stem << ": overall accuracy " << format_number(report.overall_accuracy)
            << (report.cfps.degenerate ? " (no misclassifications, CFPS degenerate)" : "") << '\n';
        sets.push_back(std::move(preds));
        ids.push_back(id);
    }
    if (sets.size() > 1) {
        const auto table = similarity_table(sets, ids, similarity_flag(a.similarity));
        write_similarity(table, sets.size(), a.out_dir, a.stem + "_similarity");
        for (const auto& p : table.to_json.at("pairs"))
            out << "similarity m" << p.at("a").get<std::size_t>() << " m" << p.at("b").get<std::size_t>() << ": "
                << format_number(p.at("similarity").get<double>()) << '\n';
    }
    return ok;
}

// ---------------------------------------------------------------------------
// attack

struct AttackArgs {
    Common common;
    std::string model, data, out_dir = ".", attack = "pgd", eps, step_size, archive;
    std::optional<int> steps;
    std::optional<int> target;
    bool all_targets = false, random_start = false;
    std::size_t batch_size = 100;
};

void add_attack(CLI::App& app, AttackArgs& a) {
    auto* sub = app.add_subcommand("attack", "Adversarial evaluation (untargeted, one target or every target)");
    add_common(sub, a.common);
    sub->add_option("--model", a.model, "Model container");
    sub->add_option("--data", a.data, "Evaluation data");
    sub->add_option("--out-dir", a.out_dir)->capture_default_str();
    sub->add_option("--attack", a.attack, "pgd or fgsm")->check(CLI::IsMember({"pgd", "fgsm"}))->capture_default_str();
    sub->add_option("--eps", a.eps, "Budget, fraction or decimal (default 8/255 untargeted, 2/255 targeted)");
    sub->add_option("--steps", a.steps, "PGD steps (default 20)");
    sub->add_option("--step-size", a.step_size, "PGD step size (default 2.5*eps/steps)");
    sub->add_flag("--random-start", a.random_start, "Uniform start inside the budget");
    sub->add_option("--target", a.target, "Target class for a targeted attack");
    sub->add_flag("--all-targets", a.all_targets, "Targeted attack towards every class in turn");
    sub->add_option("--archive", a.archive, "Save the adversarial images as a dataset with a manifest");
    sub->add_option("--batch-size", a.batch_size)->check(CLI::PositiveNumber)->capture_default_str();
}

AttackConfig attack_config(const AttackArgs& a, std::optional<int> target) {
    AttackConfig cfg = target ? AttackConfig::targeted_default(*target) : AttackConfig::untargeted_default();
    cfg.kind = parse_attack_kind(a.attack);
    if (!a.eps.empty()) cfg.epsilon = parse_epsilon(a.eps);
    if (a.steps) cfg.steps = *a.steps;
    cfg.step_size = a.step_size.empty() ? AttackConfig::default_step_size(cfg.epsilon, std::max(cfg.steps, 1))
                                        : parse_epsilon(a.step_size);
    cfg.random_start = a.random_start;
    cfg.seed = a.common.seed;
    return cfg;
}

void archive_adversarial(const AttackResult& r, const LabeledDataset& data, const json& provenance,
                         const std::string& path) {
    LabeledDataset adv;
    adv.manifest = data.manifest;
    adv.manifest.name = data.manifest.name + "-adversarial";
    adv.manifest.source = DatasetSource::archive;
    adv.manifest.provenance = provenance;
    adv.images = r.adversarial;
    adv.labels = data.labels;
    save_dataset(adv, path);
}

int cmd_attack(const AttackArgs& a, std::ostream& out) {
    require(a.model, "--model");
    require(a.data, "--data");
    if (a.target && a.all_targets) throw InvalidConfig("--target and --all-targets are mutually exclusive");

    const LabeledDataset data = load_data(a.data);
    if (data.size() == 0) throw EmptyDataset();
    const Loaded l = load_model_checked(a.model);
    check_compatible(l.model, data);
    const ExecPolicy policy{a.common.threads};
    const json base{{"command", "attack"}, {"model", model_identity(l.model, l.hash)},
                    {"data", data_identity(a.data, data)}};
    const fs::path dir = a.out_dir;

    auto run_one = [&](std::optional<int> target, const std::string& stem) {
        const AttackConfig cfg = attack_config(a, target);
        cfg.validate(l.model.num_classes);
        AttackResult r = attack_dataset(l.model, data, cfg, a.batch_size, policy);
        r.predictions.model_hash = l.hash;
        ClasswiseReport report = build_report(r.predictions, data, base);
        write_report_files(report, dir, stem);
        write_text(dir / (stem + "_predictions.csv"),
                   predictions_csv(r.predictions, &r.perturbation, target ? &r.success : nullptr));
        if (!a.archive.empty()) {
            const std::string path = target && a.all_targets ? a.archive + ".target" + std::to_string(*target)
                                                              : a.archive;
            archive_adversarial(r, data, report.provenance, path);
        }
        return report;
    };

    if (!a.all_targets) {
        const ClasswiseReport report = run_one(a.target, a.target ? "target_" + std::to_string(*a.target) : "robust");
        out << (a.target ? "targeted" : "untargeted") << ' ' << a.attack << ": robust accuracy "
            << format_number(report.overall_accuracy);
        if (report.targeted_success_rate) out << ", success rate " << format_number(*report.targeted_success_rate);
        out << '\n';
        return ok;
    }

    const std::size_t c = l.model.num_classes;
    std::vector<double> rates(c);
    json table = json::array();
    std::ostringstream csv;
    csv << "target,class_name,non_target_samples,successes,success_rate\n";
    for (std::size_t k = 0; k < c; ++k) {
        const int t = static_cast<int>(k);
        const ClasswiseReport report = run_one(t, "target_" + std::to_string(k));
        rates[k] = *report.targeted_success_rate;
        const std::uint64_t denom = report.sample_count - report.support[k];
        const std::uint64_t hits = report.confusion.col_sum(k) - report.confusion.at(k, k);
        csv << k << ',' << report.class_names[k] << ',' << denom << ',' << hits << ',' << format_number(rates[k])
            << '\n';
        table.push_back({{"target", k}, {"class_name", report.class_names[k]}, {"non_target_samples", denom},
                         {"successes", hits}, {"success_rate", rates[k]}});
        out << "target " << k << " (" << report.class_names[k] << "): success rate " << format_number(rates[k])
            << '\n';
    }
    const AttackConfig cfg = attack_config(a, 0);
    json summary = base;
    summary["attack"] = {{"kind", a.attack},
                         {"epsilon", cfg.epsilon},
                         {"steps", cfg.steps},
                         {"step_size", cfg.step_size},
                         {"random_start", cfg.random_start},
                         {"seed", cfg.seed}};
    const json doc{{"success_rates", table}, {"provenance", summary}};
    write_text(dir / "targeted_success.json", canonical_json(doc));
    write_text(dir / "targeted_success.csv", csv.str());
    write_text(dir / "targeted_success.svg",
               svg_bar_chart("Targeted attack success rate", class_names_for(data), {rates}, {"success rate"}));
    return ok;
}

// ---------------------------------------------------------------------------
// corrupt

struct CorruptArgs {
    Common common;
    std::string model, data, out_dir = ".", export_dir;
    std::vector<std::string> kinds;
    std::vector<int> severities;
    std::optional<double> parameter;
    std::size_t batch_size = 100;
};

void add_corrupt(CLI::App& app, CorruptArgs& a) {
    std::vector<std::string> kind_names;
    for (auto k : all_corruption_kinds()) kind_names.emplace_back(to_string(k));
    auto* sub = app.add_subcommand("corrupt", "Common-corruption sweep over kinds and severities");
    add_common(sub, a.common);
    sub->add_option("--model", a.model, "Model container");
    sub->add_option("--data", a.data, "Evaluation data");
    sub->add_option("--out-dir", a.out_dir)->capture_default_str();
    sub->add_option("--kinds", a.kinds, "Corruption kinds (default: all)")
        ->delimiter(',')
        ->check(CLI::IsMember(kind_names));
    sub->add_option("--severities", a.severities, "Severities 1-5 (default: all)")
        ->delimiter(',')
        ->check(CLI::Range(1, 5));
    sub->add_option("--parameter", a.parameter, "Replace the table magnitude for every severity");
    sub->add_option("--export", a.export_dir, "Directory receiving each corrupted dataset");
    sub->add_option("--batch-size", a.batch_size)->check(CLI::PositiveNumber)->capture_default_str();
}

int cmd_corrupt(const CorruptArgs& a, std::ostream& out) {
    require(a.model, "--model");
    require(a.data, "--data");
    std::vector<CorruptionKind> kinds;
    for (const auto& k : a.kinds) kinds.push_back(parse_corruption_kind(k));
    if (kinds.empty()) kinds = all_corruption_kinds();
    std::vector<int> severities = a.severities;
    if (severities.empty()) severities = {1, 2, 3, 4, 5};
    for (auto kind : kinds)
        for (int s : severities) CorruptionConfig{kind, s, a.common.seed, a.parameter}.validate();

    const LabeledDataset data = load_data(a.data);
    if (data.size() == 0) throw EmptyDataset();
    const Loaded l = load_model_checked(a.model);
    check_compatible(l.model, data);
    const ExecPolicy policy{a.common.threads};
    const json base{{"command", "corrupt"}, {"model", model_identity(l.model, l.hash)},
                    {"data", data_identity(a.data, data)}};
    const fs::path dir = a.out_dir;

    PredictionSet clean = evaluate(l.model, data, a.batch_size, policy);
    clean.model_hash = l.hash;
    const ClasswiseReport clean_report = build_report(clean, data, base);
    write_report_files(clean_report, dir, "clean");

    const auto sweep = corruption_sweep(l.model, data, kinds, severities, a.common.seed, a.batch_size, policy,
                                        a.parameter);
    const auto& names = data.manifest.class_names;
    std::ostringstream grid;
    grid << "kind,severity,parameter,overall_accuracy,cfps_degenerate";
    for (const auto& n : names) grid << ",recall_" << n;
    for (const auto& n : names) grid << ",cfps_" << n;
    grid << '\n';

    std::vector<std::string> kind_labels, sev_labels;
    for (auto k : kinds) kind_labels.emplace_back(to_string(k));
    for (int s : severities) sev_labels.push_back("s" + std::to_string(s));
    std::vector<double> accuracy_grid;

    for (auto kind : kinds)
        for (int s : severities) {
            PredictionSet preds = sweep.at({kind, s});
            preds.model_hash = l.hash;
            const ClasswiseReport report = build_report(preds, data, base);
            const std::string stem = std::string(to_string(kind)) + "_s" + std::to_string(s);
            write_report_files(report, dir, stem);
            const double param = CorruptionConfig{kind, s, a.common.seed, a.parameter}.parameter();
            grid << to_string(kind) << ',' << s << ',' << format_number(param) << ','
                 << format_number(report.overall_accuracy) << ',' << (report.cfps.degenerate ? 1 : 0);
            for (const auto& r : report.recall) grid << ',' << (r ? format_number(*r) : "");
            for (double v : report.cfps.scores) grid << ',' << format_number(v);
            grid << '\n';
            accuracy_grid.push_back(report.overall_accuracy);
            out << stem << ": accuracy " << format_number(report.overall_accuracy) << '\n';

            if (!a.export_dir.empty()) {
                LabeledDataset exported;
                exported.manifest = data.manifest;
                exported.manifest.name = data.manifest.name + "-" + stem;
                exported.manifest.source = DatasetSource::archive;
                exported.manifest.provenance = report.provenance;
                exported.images = corrupt(data.images, CorruptionConfig{kind, s, a.common.seed, a.parameter});
                exported.labels = data.labels;
                save_dataset(exported, fs::path(a.export_dir) / (stem + ".bin"));
            }
        }
    write_text(dir / "corruption_grid.csv", grid.str());
    write_text(dir / "corruption_grid.svg",
               svg_heatmap("Accuracy under corruption", kind_labels, sev_labels, accuracy_grid, false));
    return ok;
}

// ---------------------------------------------------------------------------
// report

struct ReportArgs {
    Common common;
    std::string input, out_dir, stem, print;
};

void add_report(CLI::App& app, ReportArgs& a) {
    auto* sub = app.add_subcommand("report", "Regenerate CSV and SVG outputs from a report JSON");
    add_common(sub, a.common);
    sub->add_option("--input", a.input, "Report JSON written by evaluate, attack or corrupt");
    sub->add_option("--out-dir", a.out_dir, "Output directory (default: next to the input)");
    sub->add_option("--stem", a.stem, "Output stem (default: input file stem)");
    sub->add_option("--print", a.print, "Also print the report to stdout as json or csv")
        ->check(CLI::IsMember({"json", "csv"}));
}

int cmd_report(const ReportArgs& a, std::ostream& out) {
    require(a.input, "--input");
    const auto bytes = read_file(a.input);
    json j;
    try {
        j = json::parse(bytes.begin(), bytes.end());
    } catch (const json::exception& e) {
        throw FormatError("report '" + a.input + "': " + e.what());
    }
    const ClasswiseReport report = report_from_json(j);
    const fs::path input(a.input);
    const fs::path dir = a.out_dir.empty() ? input.parent_path() : fs::path(a.out_dir);
    write_report_files(report, dir, a.stem.empty() ? input.stem().string() : a.stem);
    if (a.print == "json") out << emit_report(report, ReportFormat::json);
    if (a.print == "csv") out << emit_report(report, ReportFormat::csv);
    return ok;
}

// ---------------------------------------------------------------------------
// compare

struct CompareArgs {
    Common common;
    std::vector<std::string> models;
    std::string data, out_dir = ".", attack = "none", eps, step_size, similarity = "one_hot";
    std::optional<int> steps;
    bool random_start = false;
    std::size_t batch_size = 100;
};

void add_compare(CLI::App& app, CompareArgs& a) {
    auto* sub = app.add_subcommand("compare", "Cross-model prediction similarity and aggregated confusion");
    add_common(sub, a.common);
    sub->add_option("--models", a.models, "Two or more model containers");
    sub->add_option("--data", a.data, "Evaluation data");
    sub->add_option("--out-dir", a.out_dir)->capture_default_str();
    sub->add_option("--attack", a.attack, "none, pgd or fgsm")
        ->check(CLI::IsMember({"none", "pgd", "fgsm"}))
        ->capture_default_str();
    sub->add_option("--eps", a.eps, "Budget (default 8/255)");
    sub->add_option("--steps", a.steps, "PGD steps (default 20)");
    sub->add_option("--step-size", a.step_size, "PGD step size (default 2.5*eps/steps)");
    sub->add_flag("--random-start", a.random_start);
    sub->add_option("--similarity", a.similarity, "one_hot or recall_vector")
        ->check(CLI::IsMember({"one_hot", "recall_vector"}))
        ->capture_default_str();
    sub->add_option("--batch-size", a.batch_size)->check(CLI::PositiveNumber)->capture_default_str();
}

int cmd_compare(const CompareArgs& a, std::ostream& out) {
    if (a.models.size() < 2) throw InvalidConfig("--models needs at least two model containers");
    require(a.data, "--data");
    const LabeledDataset data = load_data(a.data);
    if (data.size() == 0) throw EmptyDataset();
    const ExecPolicy policy{a.common.threads};
    const json data_id = data_identity(a.data, data);
    const fs::path dir = a.out_dir;

    std::optional<AttackConfig> attack;
    if (a.attack != "none") {
        AttackArgs tmp;
        tmp.common = a.common;
        tmp.attack = a.attack;
        tmp.eps = a.eps;
        tmp.steps = a.steps;
        tmp.step_size = a.step_size;
        tmp.random_start = a.random_start;
        attack = attack_config(tmp, std::nullopt);
    }

    std::vector<PredictionSet> sets;
    std::vector<json> ids;
    std::vector<ConfusionMatrix> matrices;
    json accuracies = json::array();
    for (std::size_t i = 0; i < a.models.size(); ++i) {
        const Loaded l = load_model_checked(a.models[i]);
        check_compatible(l.model, data);
        PredictionSet preds;
        if (attack) {
            attack->validate(l.model.num_classes);
            preds = attack_dataset(l.model, data, *attack, a.batch_size, policy).predictions;
        } else {
            preds = evaluate(l.model, data, a.batch_size, policy);
        }
        preds.model_hash = l.hash;
        const json id = model_identity(l.model, l.hash);
        const ClasswiseReport report = build_report(preds, data, {{"command", "compare"}, {"model", id},
                                                                  {"data", data_id}});
        write_report_files(report, dir, "model_" + std::to_string(i));
        accuracies.push_back(report.overall_accuracy);
        matrices.push_back(report.confusion);
        sets.push_back(std::move(preds));
        ids.push_back(id);
    }

    const auto table = similarity_table(sets, ids, similarity_flag(a.similarity));
    write_similarity(table, sets.size(), dir, "similarity");
    const AggregatedConfusion agg = aggregate_confusions(matrices);
    const auto& names = data.manifest.class_names;
    write_text(dir / "confusion_pooled.csv", confusion_csv(agg.pooled, names));
    write_text(dir / "confusion_mean.csv", grid_csv(agg.mean, names, names));
    std::vector<double> pooled(agg.pooled.counts().begin(), agg.pooled.counts().end());
    write_text(dir / "confusion_pooled_heatmap.svg", svg_heatmap("Pooled confusion", names, names, pooled, true));
    write_text(dir / "confusion_mean_heatmap.svg", svg_heatmap("Mean confusion", names, names, agg.mean, false));

    json prov{{"command", "compare"}, {"models", ids}, {"data", data_id}};
    if (attack)
        prov["attack"] = {{"kind", a.attack},          {"epsilon", attack->epsilon},
                          {"steps", attack->steps},    {"step_size", attack->step_size},
                          {"random_start", attack->random_start}, {"seed", attack->seed}};
    json pooled_rows = json::array();
    for (std::size_t r = 0; r < agg.pooled.num_classes(); ++r) {
        json row = json::array();
        for (std::size_t c = 0; c < agg.pooled.num_classes(); ++c) row.push_back(agg.pooled.at(r, c));
        pooled_rows.push_back(row);
    }
    const json doc{{"overall_accuracy", accuracies},
                   {"similarity", table.to_json},
                   {"confusion_pooled", pooled_rows},
                   {"confusion_mean", agg.mean},
                   {"provenance", prov}};
    write_text(dir / "compare.json", canonical_json(doc));
    for (const auto& p : table.to_json.at("pairs"))
        out << "similarity m" << p.at("a").get<std::size_t>() << " m" << p.at("b").get<std::size_t>() << ": "
            << format_number(p.at("similarity").get<double>()) << '\n';
    return ok;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Class-wise robustness toolkit: train, attack, corrupt and report per-class metrics", "cwr"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "Help for every subcommand");

    TrainArgs train_args;
    EvaluateArgs evaluate_args;
    AttackArgs attack_args;
    CorruptArgs corrupt_args;
    ReportArgs report_args;
    CompareArgs compare_args;
    add_train(app, train_args);
    add_evaluate(app, evaluate_args);
    add_attack(app, attack_args);
    add_corrupt(app, corrupt_args);
    add_report(app, report_args);
    add_compare(app, compare_args);

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
        CLI::App* sub = app.get_subcommands().front();
        const Common* common = nullptr;
        if (sub->get_name() == "train") common = &train_args.common;
        if (sub->get_name() == "evaluate") common = &evaluate_args.common;
        if (sub->get_name() == "attack") common = &attack_args.common;
        if (sub->get_name() == "corrupt") common = &corrupt_args.common;
        if (sub->get_name() == "report") common = &report_args.common;
        if (sub->get_name() == "compare") common = &compare_args.common;
        if (!common->config.empty()) apply_config(sub, common->config);

        if (sub->get_name() == "train") return cmd_train(train_args, out);
        if (sub->get_name() == "evaluate") return cmd_evaluate(evaluate_args, out);
        if (sub->get_name() == "attack") return cmd_attack(attack_args, out);
        if (sub->get_name() == "corrupt") return cmd_corrupt(corrupt_args, out);
        if (sub->get_name() == "report") return cmd_report(report_args, out);
        return cmd_compare(compare_args, out);
    } catch (const CLI::Success& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return bad_args;
    } catch (const CLI::Error& e) {
        err << "error: " << e.what() << '\n';
        return bad_args;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return exit_code_for(e.category());
    } catch (const fs::filesystem_error& e) {
        err << "error: " << e.what() << '\n';
        return io_failure;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return io_failure;
    }
}

}  // namespace cwr::cli
