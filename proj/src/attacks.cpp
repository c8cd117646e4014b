#include "cwr/attacks.hpp"

#include <algorithm>
#include <cmath>

#include "cwr/random.hpp"

namespace cwr {

std::string_view to_string(AttackKind kind) { return kind == AttackKind::fgsm ? "fgsm" : "pgd"; }

AttackKind parse_attack_kind(std::string_view name) {
    if (name == "fgsm") return AttackKind::fgsm;
    if (name == "pgd") return AttackKind::pgd;
    throw InvalidConfig("unknown attack '" + std::string(name) + "'");
}

AttackConfig AttackConfig::untargeted_default() {
    AttackConfig cfg;
    cfg.epsilon = 8.0 / 255.0;
    cfg.steps = 20;
    cfg.step_size = default_step_size(cfg.epsilon, cfg.steps);
    return cfg;
}

AttackConfig AttackConfig::targeted_default(int target) {
    AttackConfig cfg;
    cfg.epsilon = 2.0 / 255.0;
    cfg.steps = 20;
    cfg.step_size = default_step_size(cfg.epsilon, cfg.steps);
    cfg.target = target;
    return cfg;
}

AttackConfig AttackConfig::training_default() {
    AttackConfig cfg;
    cfg.epsilon = 8.0 / 255.0;
    cfg.steps = 7;
    cfg.step_size = 2.0 / 255.0;
    cfg.random_start = true;
    return cfg;
}

void AttackConfig::validate(std::size_t num_classes) const {
    if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw InvalidConfig("epsilon must be in [0,1]");
    if (kind == AttackKind::pgd) {
        if (steps < 1) throw InvalidConfig("pgd steps must be positive");
        if (!(step_size > 0.0)) throw InvalidConfig("pgd step size must be positive");
    }
    if (target) {
        if (*target < 0 || (num_classes && static_cast<std::size_t>(*target) >= num_classes))
            throw InvalidConfig("target class " + std::to_string(*target) + " out of range");
        if (kind == AttackKind::fgsm) throw InvalidConfig("targeted attacks require pgd");
    }
}

namespace {

inline float sign(float g) { return g > 0.0f ? 1.0f : (g < 0.0f ? -1.0f : 0.0f); }

}  // namespace

ImageBatch fgsm(const Model& model, const ImageBatch& batch, std::span<const int> labels, double epsilon,
                const ExecPolicy& policy) {
    if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw InvalidConfig("epsilon must be in [0,1]");
    const ImageBatch grad = input_gradient(model, batch, labels, policy);
    const float eps = static_cast<float>(epsilon);
    ImageBatch out = batch;
    for (std::size_t k = 0; k < out.size(); ++k)
        out[k] = std::clamp(batch[k] + eps * sign(grad[k]), 0.0f, 1.0f);
    return out;
}

ImageBatch pgd(const Model& model, const ImageBatch& batch, std::span<const int> labels, const AttackConfig& cfg,
               const ExecPolicy& policy, std::size_t first_index, const IterateObserver& observer) {
    cfg.validate(model.num_classes);
    if (cfg.kind != AttackKind::pgd) throw InvalidConfig("pgd called with a non-pgd config");

    const std::size_t n = batch.dim(0);
    const std::size_t row = batch.row_size();
    const float eps = static_cast<float>(cfg.epsilon);
    const float step = static_cast<float>(cfg.step_size);

    std::vector<float> lo(batch.size()), hi(batch.size());
    for (std::size_t k = 0; k < batch.size(); ++k) {
        lo[k] = std::max(batch[k] - eps, 0.0f);
        hi[k] = std::min(batch[k] + eps, 1.0f);
    }

    std::vector<int> objective(labels.begin(), labels.end());
    float direction = 1.0f;
    if (cfg.target) {
        objective.assign(n, *cfg.target);
        direction = -1.0f;
    }

    ImageBatch x = batch;
    if (cfg.random_start) {
        for (std::size_t i = 0; i < n; ++i) {
            Rng rng(derive_seed(cfg.seed, first_index + i));
            for (std::size_t k = i * row; k < (i + 1) * row; ++k) {
                const float noise = static_cast<float>(rng.uniform(-cfg.epsilon, cfg.epsilon));
                x[k] = std::clamp(batch[k] + noise, lo[k], hi[k]);
            }
        }
    }

    for (int s = 1; s <= cfg.steps; ++s) {
        const ImageBatch grad = input_gradient(model, x, objective, policy);
        for (std::size_t k = 0; k < x.size(); ++k)
            x[k] = std::clamp(x[k] + direction * step * sign(grad[k]), lo[k], hi[k]);
        if (observer) observer(s, x);
    }
    return x;
}

ImageBatch run_attack(const Model& model, const ImageBatch& batch, std::span<const int> labels,
                      const AttackConfig& cfg, const ExecPolicy& policy, std::size_t first_index) {
    if (cfg.kind == AttackKind::fgsm) return fgsm(model, batch, labels, cfg.epsilon, policy);
    return pgd(model, batch, labels, cfg, policy, first_index);
}

std::vector<float> perturbation_norms(const ImageBatch& clean, const ImageBatch& adversarial) {
    if (clean.shape() != adversarial.shape()) throw DimensionMismatch("clean and adversarial batches differ");
    std::vector<float> norms(clean.dim(0), 0.0f);
    for (std::size_t i = 0; i < norms.size(); ++i) {
        auto a = clean.row(i);
        auto b = adversarial.row(i);
        for (std::size_t k = 0; k < a.size(); ++k) norms[i] = std::max(norms[i], std::abs(b[k] - a[k]));
    }
    return norms;
}

AttackResult attack_dataset(const Model& model, const LabeledDataset& data, const AttackConfig& cfg,
                            std::size_t batch_size, const ExecPolicy& policy) {
    cfg.validate(model.num_classes);
    if (data.size() == 0) throw EmptyDataset();
    batch_size = std::max<std::size_t>(1, batch_size);

    AttackResult result;
    result.adversarial = data.images;
    for (std::size_t first = 0; first < data.size(); first += batch_size) {
        const std::size_t count = std::min(batch_size, data.size() - first);
        const ImageBatch adv =
            run_attack(model, data.batch(first, count), data.batch_labels(first, count), cfg, policy, first);
        std::copy(adv.storage().begin(), adv.storage().end(),
                  result.adversarial.storage().begin() + static_cast<std::ptrdiff_t>(first * adv.row_size()));
    }
    result.perturbation = perturbation_norms(data.images, result.adversarial);
    result.predictions = classify(model, result.adversarial, data.labels, batch_size, policy);

    nlohmann::json prov;
    prov["kind"] = "attack";
    prov["attack"] = to_string(cfg.kind);
    prov["epsilon"] = cfg.epsilon;
    prov["steps"] = cfg.kind == AttackKind::pgd ? cfg.steps : 1;
    prov["step_size"] = cfg.kind == AttackKind::pgd ? cfg.step_size : cfg.epsilon;
    prov["random_start"] = cfg.kind == AttackKind::pgd && cfg.random_start;
    prov["target"] = cfg.target ? nlohmann::json(*cfg.target) : nlohmann::json(nullptr);
    prov["seed"] = cfg.seed;
    result.predictions.provenance = prov;

    if (cfg.target) {
        result.success.resize(data.size());
        for (std::size_t i = 0; i < data.size(); ++i)
            result.success[i] = result.predictions.predicted[i] == *cfg.target;
    }
    return result;
}

}  // namespace cwr
