#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "detnas/flops.hpp"
#include "detnas/rng.hpp"
#include "detnas/searchspace.hpp"
#include "detnas/sgd.hpp"
#include "detnas/tasks.hpp"
#include "detnas/tensor.hpp"

namespace detnas {

enum class Phase : uint8_t {
    kInitialized = 0,
    kPretrained = 1,
    kFinetuned = 2,
};

const char* phase_name(Phase phase);

struct BnParam {
    Tensor scale;         // learnable, shared per (block, choice)
    Tensor shift;         // learnable, shared per (block, choice)
    Tensor running_mean;  // supernet-level statistics (EMA during training)
    Tensor running_var;
};

struct ConvBnParam {
    ConvSpec spec;
    Tensor weight;
    BnParam bn;
};

struct FcParam {
    Tensor weight;
    Tensor bias;
};

enum class HeadKind : uint8_t { kClassification = 0, kLocalization = 1 };

struct BlockInfo {
    int in_channels = 0;
    int out_channels = 0;
    int stride = 1;
};

// Shared parameter store: stem, 4 disjoint parameter bundles per searchable
// block, and one head per task. Bundle j of block b is the conv/BN chain of
// block_plan(choice j, ...) in left-then-right order.
class SupernetWeights {
  public:
    SupernetWeights(SearchSpaceSpec space, int classes, uint64_t seed);

    const SearchSpaceSpec& space() const { return space_; }
    int classes() const { return classes_; }
    int block_count() const { return static_cast<int>(blocks_.size()); }
    const BlockInfo& block_info(int b) const { return blocks_[static_cast<size_t>(b)]; }
    int head_in_features() const { return blocks_.back().out_channels; }

    Phase phase() const { return phase_; }
    void set_phase(Phase p) { phase_ = p; }
    uint64_t step() const { return step_; }
    void set_step(uint64_t s) { step_ = s; }
    uint64_t seed() const { return seed_; }
    void set_seed(uint64_t s) { seed_ = s; }

    ConvBnParam& stem() { return stem_; }
    std::vector<ConvBnParam>& bundle(int block, ChoiceKind choice);
    const std::vector<ConvBnParam>& bundle(int block, ChoiceKind choice) const;
    FcParam& cls_head() { return cls_head_; }
    FcParam& loc_head() { return loc_head_; }

    struct NamedTensor {
        std::string name;
        Tensor* tensor;
    };
    // Deterministic enumeration of every tensor (stem, all bundles, both
    // heads); the order defines the checkpoint layout.
    std::vector<NamedTensor> named_tensors();
    // Tensors of one (block, choice) bundle, for isolation checks.
    std::vector<NamedTensor> bundle_tensors(int block, ChoiceKind choice);

  private:
    SearchSpaceSpec space_;
    int classes_ = 0;
    Phase phase_ = Phase::kInitialized;
    uint64_t step_ = 0;
    uint64_t seed_ = 0;
    ConvBnParam stem_;
    std::vector<BlockInfo> blocks_;
    std::vector<std::array<std::vector<ConvBnParam>, kNumChoices>> bundles_;
    FcParam cls_head_;
    FcParam loc_head_;
};

enum class BnStatsMode {
    kShared,   // running statistics point into the supernet store (training)
    kPrivate,  // instance-owned copies (evaluation / recalibration)
};

enum class ForwardMode {
    kTrain,      // batch-stat normalization, caches for backward, EMA on running stats
    kEval,       // running-stat normalization, no caches
    kCalibrate,  // batch-stat normalization, running stats overwritten with batch moments
};

// One architecture instantiated against the shared store. Parameter tensors
// are referenced, never copied; gradients are instance-owned; BN running
// statistics are shared or private per BnStatsMode.
class PathNetwork {
  public:
    PathNetwork(SupernetWeights& weights, const Architecture& arch, HeadKind head,
                BnStatsMode stats_mode);

    // Head output: logits (N, classes) or sigmoid-bounded box coords (N, 4).
    Tensor forward(const Tensor& images, ForwardMode mode);

    // Backward from the loss gradient w.r.t. the head output; accumulates
    // into the instance's gradient buffers (call zero_grads() first).
    void backward(const Tensor& grad_output);

    // Overwrites this instance's BN running statistics with the exact batch
    // moments of each normalization input over one full calibration batch.
    // No learnable parameter changes and no gradients.
    void recalibrate(const Tensor& calibration_images);

    struct ParamRef {
        Tensor* value;  // shared storage in SupernetWeights
        Tensor* grad;   // instance-owned
    };
    std::vector<ParamRef> parameters();
    void zero_grads();

    HeadKind head() const { return head_; }
    const Architecture& architecture() const { return arch_; }

    int bn_unit_count() const { return static_cast<int>(units_.size()); }
    const Tensor& bn_running_mean(int unit) const { return *units_[static_cast<size_t>(unit)].run_mean; }
    const Tensor& bn_running_var(int unit) const { return *units_[static_cast<size_t>(unit)].run_var; }
    // Storage identity probes for the sharing contract.
    const float* unit_weight_data(int unit) const { return units_[static_cast<size_t>(unit)].weight->data(); }

  private:
    struct Unit {
        ConvSpec spec;
        Tensor* weight = nullptr;
        Tensor* scale = nullptr;
        Tensor* shift = nullptr;
        Tensor* run_mean = nullptr;
        Tensor* run_var = nullptr;
        Tensor priv_mean, priv_var;  // backing storage in private mode
        // caches (training mode)
        Tensor x_cache, xhat_cache, bn_out_cache;
        std::vector<float> batch_var_cache;
        // instance-owned gradients
        Tensor gw, gscale, gshift;
    };

    struct Block {
        BlockPlan plan;
        int first_unit = 0;  // units_[first_unit ..] hold left then right chains
    };

    Tensor unit_forward(Unit& u, const Tensor& x, ForwardMode mode);
    Tensor unit_backward(Unit& u, const Tensor& gy);
    Tensor chain_forward(int first, int count, const Tensor& x, ForwardMode mode);
    Tensor chain_backward(int first, int count, const Tensor& gy);

    SupernetWeights& weights_;
    Architecture arch_;
    HeadKind head_;
    BnStatsMode stats_mode_;
    std::vector<Unit> units_;  // stem first, then per block
    std::vector<Block> blocks_;
    FcParam* fc_ = nullptr;
    Tensor fc_gw_, fc_gb_;
    // head caches
    Tensor gap_in_cache_, fc_in_cache_, sigmoid_out_cache_;
    std::vector<int> gap_in_dims_;
    double bn_momentum_ = 0.1;
    float bn_eps_ = 1e-5f;
};

struct TrainingSchedule {
    int pretrain_iterations = 4000;
    int finetune_iterations = 2000;
    int pretrain_batch = 64;
    int finetune_batch = 64;
    double pretrain_lr = 0.1;
    double finetune_lr = 0.02;
    double momentum = 0.9;
    double pretrain_weight_decay = 4e-5;
    double finetune_weight_decay = 1e-4;

    SgdConfig pretrain_sgd() const;
    // Step decay with milestones at 2/3 and 8/9 of the iteration budget.
    SgdConfig finetune_sgd(int iterations) const;
    void set_batch_size(int batch) { pretrain_batch = finetune_batch = batch; }
    void validate() const;
};

struct LossLogRow {
    int step;
    double lr;
    double loss;
};

struct TrainOptions {
    Phase phase = Phase::kPretrained;          // target phase of this run
    const Architecture* fixed_path = nullptr;  // stand-alone retraining
    bool from_scratch = false;                 // finetune without a pretrained tag
    int iterations_override = 0;               // 0 = use the schedule
};

// Path-wise training: per iteration one uniformly sampled path gets one
// forward/backward/SGD step on one minibatch; bundles off the sampled path
// are untouched. Returns the per-iteration loss log.
std::vector<LossLogRow> train_supernet(SupernetWeights& weights, const TrainingSchedule& schedule,
                                       const TrainOptions& options, const DatasetSplit& train_split,
                                       const TaskSpec& task, Rng& rng);

// BN recalibration on the calibration set, then the task metric on the
// validation split in eval mode. Touches no shared weights.
double evaluate_path(SupernetWeights& weights, const Architecture& arch, const TaskSpec& task,
                     const DatasetSplit& calibration, const DatasetSplit& validation,
                     int eval_batch = 256);

// Task metric of an instantiated path over a split, in eval mode.
double task_metric(PathNetwork& net, const DatasetSplit& split, const TaskSpec& spec,
                   int eval_batch = 256);

}  // namespace detnas
