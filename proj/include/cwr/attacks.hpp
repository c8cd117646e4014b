#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "cwr/dataset.hpp"
#include "cwr/engine.hpp"
#include "cwr/prediction.hpp"

namespace cwr {

enum class AttackKind { fgsm, pgd };

std::string_view to_string(AttackKind kind);
AttackKind parse_attack_kind(std::string_view name);

/// L-infinity attack budget and schedule, in [0,1] pixel units.
struct AttackConfig {
    AttackKind kind = AttackKind::pgd;
    double epsilon = 8.0 / 255.0;
    int steps = 20;
    double step_size = 2.5 * (8.0 / 255.0) / 20.0;
    bool random_start = false;
    std::optional<int> target;
    std::uint64_t seed = 0;

    /// Evaluation-time untargeted PGD: eps 8/255, 20 steps, no random start.
    static AttackConfig untargeted_default();
    /// Evaluation-time targeted PGD: eps 2/255, 20 steps, no random start.
    static AttackConfig targeted_default(int target);
    /// Training-time PGD: eps 8/255, 7 steps of 2/255, random start.
    static AttackConfig training_default();
    /// Conventional step size 2.5 * eps / steps.
    static double default_step_size(double epsilon, int steps) { return 2.5 * epsilon / steps; }

    /// Throws InvalidConfig on out-of-range fields. num_classes == 0 skips the target check.
    void validate(std::size_t num_classes = 0) const;
};

/// x' = clamp(x + eps * sign(grad_x L(f(x), y)), 0, 1), with sign(0) = 0.
ImageBatch fgsm(const Model& model, const ImageBatch& batch, std::span<const int> labels, double epsilon,
                const ExecPolicy& policy = {});

/// Called after every PGD iterate with (step index starting at 1, iterate).
using IterateObserver = std::function<void(int, const ImageBatch&)>;

/// Projected gradient descent in the eps max-norm ball around `batch`
/// intersected with [0,1]. Untargeted ascends L(f(x), labels); targeted
/// (cfg.target set) descends L(f(x), target) and ignores `labels`.
/// Random-start noise for row i is drawn from the stream
/// derive_seed(cfg.seed, first_index + i).
ImageBatch pgd(const Model& model, const ImageBatch& batch, std::span<const int> labels, const AttackConfig& cfg,
               const ExecPolicy& policy = {}, std::size_t first_index = 0,
               const IterateObserver& observer = {});

/// Dispatches on cfg.kind.
ImageBatch run_attack(const Model& model, const ImageBatch& batch, std::span<const int> labels,
                      const AttackConfig& cfg, const ExecPolicy& policy = {}, std::size_t first_index = 0);

/// Row-wise max |adv - clean|.
std::vector<float> perturbation_norms(const ImageBatch& clean, const ImageBatch& adversarial);

struct AttackResult {
    PredictionSet predictions;
    ImageBatch adversarial;
    std::vector<float> perturbation;  // per-sample max-norm
    std::vector<bool> success;        // targeted runs: predicted == target
};

/// Attacks the dataset batch by batch and classifies the perturbed inputs.
AttackResult attack_dataset(const Model& model, const LabeledDataset& data, const AttackConfig& cfg,
                            std::size_t batch_size = 100, const ExecPolicy& policy = {});

}  // namespace cwr
