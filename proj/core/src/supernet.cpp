#include "detnas/supernet.hpp"

#include <algorithm>
#include <cmath>

#include "detnas/errors.hpp"
#include "detnas/nn_ops.hpp"

namespace detnas {

const char* phase_name(Phase phase) {
    switch (phase) {
        case Phase::kInitialized: return "initialized";
        case Phase::kPretrained: return "pretrained";
        case Phase::kFinetuned: return "finetuned";
    }
    throw Error("unreachable phase");
}

namespace {

Tensor init_conv_weight(const ConvSpec& spec, Rng& rng) {
    Tensor w({spec.out_channels, spec.in_channels / spec.groups, spec.kernel, spec.kernel});
    const int fan_in = (spec.in_channels / spec.groups) * spec.kernel * spec.kernel;
    const float stddev = std::sqrt(2.0f / static_cast<float>(fan_in));
    for (size_t i = 0; i < w.numel(); ++i) w[i] = rng.normal_f(stddev);
    return w;
}

BnParam init_bn(int channels) {
    BnParam bn;
    bn.scale = Tensor({channels});
    bn.scale.fill(1.0f);
    bn.shift = Tensor({channels});
    bn.running_mean = Tensor({channels});
    bn.running_var = Tensor({channels});
    bn.running_var.fill(1.0f);
    return bn;
}

ConvBnParam init_conv_bn(const ConvSpec& spec, Rng& rng) {
    ConvBnParam p;
    p.spec = spec;
    p.weight = init_conv_weight(spec, rng);
    p.bn = init_bn(spec.out_channels);
    return p;
}

FcParam init_fc(int in_features, int out_features, Rng& rng) {
    FcParam fc;
    fc.weight = Tensor({out_features, in_features});
    const float stddev = std::sqrt(2.0f / static_cast<float>(in_features));
    for (size_t i = 0; i < fc.weight.numel(); ++i) fc.weight[i] = rng.normal_f(stddev);
    fc.bias = Tensor({out_features});
    return fc;
}

void append_conv_bn_tensors(std::vector<SupernetWeights::NamedTensor>& out, const std::string& prefix,
                            ConvBnParam& p) {
    out.push_back({prefix + ".w", &p.weight});
    out.push_back({prefix + ".bn.scale", &p.bn.scale});
    out.push_back({prefix + ".bn.shift", &p.bn.shift});
    out.push_back({prefix + ".bn.mean", &p.bn.running_mean});
    out.push_back({prefix + ".bn.var", &p.bn.running_var});
}

}  // namespace

SupernetWeights::SupernetWeights(SearchSpaceSpec space, int classes, uint64_t seed)
    : space_(std::move(space)), classes_(classes), seed_(seed) {
    space_.validate();
    if (classes_ < 2) throw ConfigError("supernet: classification head needs at least 2 classes");

    int in_ch = space_.stem_channels;
    for (const auto& stage : space_.stages) {
        for (int i = 0; i < stage.num_blocks; ++i) {
            BlockInfo info;
            info.stride = (i == 0) ? stage.first_block_stride : 1;
            info.in_channels = (i == 0) ? in_ch : stage.out_channels;
            info.out_channels = stage.out_channels;
            blocks_.push_back(info);
        }
        in_ch = stage.out_channels;
    }

    Rng rng(Rng::derive(seed, 1));
    stem_ = init_conv_bn(ConvSpec{3, space_.stem_channels, 3, 2, 1, true}, rng);
    bundles_.resize(blocks_.size());
    for (size_t b = 0; b < blocks_.size(); ++b) {
        const auto& info = blocks_[b];
        for (int c = 0; c < kNumChoices; ++c) {
            const BlockPlan plan = block_plan(static_cast<ChoiceKind>(c), info.in_channels,
                                              info.out_channels, info.stride);
            auto& bundle = bundles_[b][static_cast<size_t>(c)];
            for (const auto& conv : plan.left) bundle.push_back(init_conv_bn(conv, rng));
            for (const auto& conv : plan.right) bundle.push_back(init_conv_bn(conv, rng));
        }
    }
    cls_head_ = init_fc(head_in_features(), classes_, rng);
    loc_head_ = init_fc(head_in_features(), 4, rng);
}

std::vector<ConvBnParam>& SupernetWeights::bundle(int block, ChoiceKind choice) {
    return bundles_.at(static_cast<size_t>(block))[static_cast<size_t>(choice)];
}

const std::vector<ConvBnParam>& SupernetWeights::bundle(int block, ChoiceKind choice) const {
    return bundles_.at(static_cast<size_t>(block))[static_cast<size_t>(choice)];
}

std::vector<SupernetWeights::NamedTensor> SupernetWeights::named_tensors() {
    std::vector<NamedTensor> out;
    append_conv_bn_tensors(out, "stem.conv", stem_);
    for (size_t b = 0; b < bundles_.size(); ++b) {
        for (int c = 0; c < kNumChoices; ++c) {
            auto& bundle = bundles_[b][static_cast<size_t>(c)];
            for (size_t j = 0; j < bundle.size(); ++j)
                append_conv_bn_tensors(out,
                                       "block" + std::to_string(b) + ".choice" + std::to_string(c) +
                                           ".conv" + std::to_string(j),
                                       bundle[j]);
        }
    }
    out.push_back({"head.cls.w", &cls_head_.weight});
    out.push_back({"head.cls.b", &cls_head_.bias});
    out.push_back({"head.loc.w", &loc_head_.weight});
    out.push_back({"head.loc.b", &loc_head_.bias});
    return out;
}

std::vector<SupernetWeights::NamedTensor> SupernetWeights::bundle_tensors(int block, ChoiceKind choice) {
    std::vector<NamedTensor> out;
    auto& bundle = bundles_.at(static_cast<size_t>(block))[static_cast<size_t>(choice)];
    for (size_t j = 0; j < bundle.size(); ++j)
        append_conv_bn_tensors(out,
                               "block" + std::to_string(block) + ".choice" +
                                   std::to_string(static_cast<int>(choice)) + ".conv" +
                                   std::to_string(j),
                               bundle[j]);
    return out;
}

// ---------------------------------------------------------------------------
// PathNetwork

PathNetwork::PathNetwork(SupernetWeights& weights, const Architecture& arch, HeadKind head,
                         BnStatsMode stats_mode)
    : weights_(weights), arch_(arch), head_(head), stats_mode_(stats_mode) {
    if (static_cast<int>(arch.size()) != weights.block_count())
        throw ConfigError("instantiate_path: architecture has " + std::to_string(arch.size()) +
                          " choices, supernet has " + std::to_string(weights.block_count()) +
                          " blocks");

    auto add_unit = [&](ConvBnParam& p) {
        Unit u;
        u.spec = p.spec;
        u.weight = &p.weight;
        u.scale = &p.bn.scale;
        u.shift = &p.bn.shift;
        if (stats_mode_ == BnStatsMode::kShared) {
            u.run_mean = &p.bn.running_mean;
            u.run_var = &p.bn.running_var;
        } else {
            u.priv_mean = p.bn.running_mean;
            u.priv_var = p.bn.running_var;
        }
        u.gw = Tensor(p.weight.dims());
        u.gscale = Tensor(p.bn.scale.dims());
        u.gshift = Tensor(p.bn.shift.dims());
        units_.push_back(std::move(u));
    };

    add_unit(weights.stem());
    for (int b = 0; b < weights.block_count(); ++b) {
        const auto& info = weights.block_info(b);
        Block blk;
        blk.plan = block_plan(arch.choices[static_cast<size_t>(b)], info.in_channels,
                              info.out_channels, info.stride);
        blk.first_unit = static_cast<int>(units_.size());
        for (auto& p : weights.bundle(b, arch.choices[static_cast<size_t>(b)])) add_unit(p);
        blocks_.push_back(std::move(blk));
    }
    // Private stats live in the units vector, which must not reallocate.
    for (auto& u : units_) {
        if (stats_mode_ == BnStatsMode::kPrivate) {
            u.run_mean = &u.priv_mean;
            u.run_var = &u.priv_var;
        }
    }

    fc_ = (head_ == HeadKind::kClassification) ? &weights.cls_head() : &weights.loc_head();
    fc_gw_ = Tensor(fc_->weight.dims());
    fc_gb_ = Tensor(fc_->bias.dims());
}

Tensor PathNetwork::unit_forward(Unit& u, const Tensor& x, ForwardMode mode) {
    Tensor conv_out = nn::conv2d(x, *u.weight, u.spec.stride, u.spec.groups);
    Tensor bn_out;
    if (mode == ForwardMode::kEval) {
        bn_out = nn::batch_norm_eval(conv_out, *u.scale, *u.shift, *u.run_mean, *u.run_var, bn_eps_);
    } else {
        std::vector<float> mean, var;
        Tensor* xhat = (mode == ForwardMode::kTrain) ? &u.xhat_cache : nullptr;
        bn_out = nn::batch_norm_train(conv_out, *u.scale, *u.shift, bn_eps_, xhat, mean, var);
        if (mode == ForwardMode::kTrain) {
            u.batch_var_cache = var;
            // EMA running statistics with momentum 0.1.
            const float m = static_cast<float>(bn_momentum_);
            for (size_t i = 0; i < mean.size(); ++i) {
                (*u.run_mean)[i] = (1.0f - m) * (*u.run_mean)[i] + m * mean[i];
                (*u.run_var)[i] = (1.0f - m) * (*u.run_var)[i] + m * var[i];
            }
        } else {  // kCalibrate: exact batch moments become the running stats
            for (size_t i = 0; i < mean.size(); ++i) {
                (*u.run_mean)[i] = mean[i];
                (*u.run_var)[i] = var[i];
            }
        }
    }
    if (mode == ForwardMode::kTrain) {
        u.x_cache = x;
        u.bn_out_cache = bn_out;
    }
    return u.spec.relu ? nn::relu(bn_out) : bn_out;
}

Tensor PathNetwork::unit_backward(Unit& u, const Tensor& gy) {
    Tensor g_bn = u.spec.relu ? nn::relu_backward(u.bn_out_cache, gy) : gy;
    Tensor g_conv, gscale, gshift;
    nn::batch_norm_train_backward(u.xhat_cache, u.batch_var_cache, *u.scale, bn_eps_, g_bn, g_conv,
                                  gscale, gshift);
    for (size_t i = 0; i < gscale.numel(); ++i) {
        u.gscale[i] += gscale[i];
        u.gshift[i] += gshift[i];
    }
    Tensor gx, gw;
    nn::conv2d_backward(u.x_cache, *u.weight, u.spec.stride, u.spec.groups, g_conv, gx, gw);
    for (size_t i = 0; i < gw.numel(); ++i) u.gw[i] += gw[i];
    return gx;
}

Tensor PathNetwork::chain_forward(int first, int count, const Tensor& x, ForwardMode mode) {
    Tensor cur = x;
    for (int i = 0; i < count; ++i) cur = unit_forward(units_[static_cast<size_t>(first + i)], cur, mode);
    return cur;
}

Tensor PathNetwork::chain_backward(int first, int count, const Tensor& gy) {
    Tensor cur = gy;
    for (int i = count - 1; i >= 0; --i) cur = unit_backward(units_[static_cast<size_t>(first + i)], cur);
    return cur;
}

Tensor PathNetwork::forward(const Tensor& images, ForwardMode mode) {
    if (images.rank() != 4 || images.dim(1) != 3)
        throw ShapeError("forward: expected (N,3,H,W) images, got " + images.shape_str());

    Tensor cur = unit_forward(units_[0], images, mode);
    for (size_t b = 0; b < blocks_.size(); ++b) {
        auto& blk = blocks_[b];
        const int n_left = static_cast<int>(blk.plan.left.size());
        const int n_right = static_cast<int>(blk.plan.right.size());
        if (blk.plan.split) {
            auto [keep, through] = nn::channel_split(cur);
            Tensor right = chain_forward(blk.first_unit, n_right, through, mode);
            cur = nn::channel_shuffle(nn::concat_channels(keep, right), 2);
        } else {
            Tensor left = chain_forward(blk.first_unit, n_left, cur, mode);
            Tensor right = chain_forward(blk.first_unit + n_left, n_right, cur, mode);
            cur = nn::channel_shuffle(nn::concat_channels(left, right), 2);
        }
    }

    if (mode == ForwardMode::kTrain) gap_in_dims_ = cur.dims();
    Tensor pooled = nn::global_avg_pool(cur);
    if (mode == ForwardMode::kTrain) fc_in_cache_ = pooled;
    Tensor out = nn::fully_connected(pooled, fc_->weight, fc_->bias);
    if (head_ == HeadKind::kLocalization) {
        out = nn::sigmoid(out);
        if (mode == ForwardMode::kTrain) sigmoid_out_cache_ = out;
    }
    return out;
}

void PathNetwork::backward(const Tensor& grad_output) {
    Tensor g = grad_output;
    if (head_ == HeadKind::kLocalization) g = nn::sigmoid_backward(sigmoid_out_cache_, g);
    Tensor g_pooled, gw, gb;
    nn::fully_connected_backward(fc_in_cache_, fc_->weight, g, g_pooled, gw, gb);
    for (size_t i = 0; i < gw.numel(); ++i) fc_gw_[i] += gw[i];
    for (size_t i = 0; i < gb.numel(); ++i) fc_gb_[i] += gb[i];
    Tensor cur = nn::global_avg_pool_backward(gap_in_dims_, g_pooled);

    for (int b = static_cast<int>(blocks_.size()) - 1; b >= 0; --b) {
        auto& blk = blocks_[static_cast<size_t>(b)];
        const int n_left = static_cast<int>(blk.plan.left.size());
        const int n_right = static_cast<int>(blk.plan.right.size());
        const int channels = cur.dim(1);
        Tensor g_cat = nn::channel_shuffle(cur, channels / 2);  // inverse of shuffle(2)
        auto [g_keep, g_right_out] = nn::channel_split(g_cat);
        if (blk.plan.split) {
            Tensor g_through = chain_backward(blk.first_unit, n_right, g_right_out);
            cur = nn::concat_channels(g_keep, g_through);
        } else {
            Tensor g_left_in = chain_backward(blk.first_unit, n_left, g_keep);
            Tensor g_right_in = chain_backward(blk.first_unit + n_left, n_right, g_right_out);
            for (size_t i = 0; i < g_left_in.numel(); ++i) g_left_in[i] += g_right_in[i];
            cur = std::move(g_left_in);
        }
    }
    unit_backward(units_[0], cur);
}

void PathNetwork::recalibrate(const Tensor& calibration_images) {
    if (calibration_images.rank() != 4 || calibration_images.dim(0) == 0)
        throw ConfigError("recompute_bn_statistics: empty calibration set");
    if (stats_mode_ != BnStatsMode::kPrivate)
        throw ConfigError("recompute_bn_statistics: instance must own private BN statistics");
    forward(calibration_images, ForwardMode::kCalibrate);
}

std::vector<PathNetwork::ParamRef> PathNetwork::parameters() {
    std::vector<ParamRef> out;
    for (auto& u : units_) {
        out.push_back({u.weight, &u.gw});
        out.push_back({u.scale, &u.gscale});
        out.push_back({u.shift, &u.gshift});
    }
    out.push_back({&fc_->weight, &fc_gw_});
    out.push_back({&fc_->bias, &fc_gb_});
    return out;
}

void PathNetwork::zero_grads() {
    for (auto& u : units_) {
        u.gw.zero();
        u.gscale.zero();
        u.gshift.zero();
    }
    fc_gw_.zero();
    fc_gb_.zero();
}

// ---------------------------------------------------------------------------
// training

SgdConfig TrainingSchedule::pretrain_sgd() const {
    SgdConfig cfg;
    cfg.base_lr = pretrain_lr;
    cfg.momentum = momentum;
    cfg.weight_decay = pretrain_weight_decay;
    cfg.schedule = LrScheduleKind::kLinearDecay;
    cfg.total_steps = pretrain_iterations;
    return cfg;
}

SgdConfig TrainingSchedule::finetune_sgd(int iterations) const {
    SgdConfig cfg;
    cfg.base_lr = finetune_lr;
    cfg.momentum = momentum;
    cfg.weight_decay = finetune_weight_decay;
    cfg.schedule = LrScheduleKind::kStepDecay;
    cfg.total_steps = iterations;
    cfg.milestones = {iterations * 2 / 3, iterations * 8 / 9};
    return cfg;
}

void TrainingSchedule::validate() const {
    if (pretrain_iterations <= 0) throw ConfigError("schedule: pretrain_iterations must be positive");
    if (finetune_iterations <= 0) throw ConfigError("schedule: finetune_iterations must be positive");
    if (pretrain_batch <= 0 || finetune_batch <= 0)
        throw ConfigError("schedule: batch sizes must be positive");
    pretrain_sgd().validate();
    finetune_sgd(finetune_iterations).validate();
}

std::vector<LossLogRow> train_supernet(SupernetWeights& weights, const TrainingSchedule& schedule,
                                       const TrainOptions& options, const DatasetSplit& train_split,
                                       const TaskSpec& task, Rng& rng) {
    schedule.validate();
    if (train_split.count() == 0) throw ConfigError("train_supernet: empty training split");

    const bool pretrain_phase = options.phase == Phase::kPretrained;
    if (!pretrain_phase && !options.from_scratch && weights.phase() != Phase::kPretrained)
        throw PhaseError("train_supernet: finetuning requires pretrained weights, got phase '" +
                         std::string(phase_name(weights.phase())) + "'");
    if (pretrain_phase && weights.phase() != Phase::kInitialized)
        throw PhaseError("train_supernet: pretraining requires freshly initialized weights, got phase '" +
                         std::string(phase_name(weights.phase())) + "'");

    const int iterations = options.iterations_override > 0
                               ? options.iterations_override
                               : (pretrain_phase ? schedule.pretrain_iterations
                                                 : schedule.finetune_iterations);
    SgdConfig sgd = pretrain_phase ? schedule.pretrain_sgd() : schedule.finetune_sgd(iterations);
    sgd.total_steps = iterations;
    if (sgd.schedule == LrScheduleKind::kStepDecay)
        sgd.milestones = {iterations * 2 / 3, iterations * 8 / 9};

    const HeadKind head = pretrain_phase ? HeadKind::kClassification : HeadKind::kLocalization;
    const TaskKind expected = pretrain_phase ? TaskKind::kClassification : TaskKind::kLocalization;
    if (task.kind != expected) throw ConfigError("train_supernet: task kind does not match phase");

    SgdState velocities;
    std::vector<LossLogRow> log;
    log.reserve(static_cast<size_t>(iterations));

    for (int it = 0; it < iterations; ++it) {
        const Architecture arch = options.fixed_path ? *options.fixed_path
                                                     : random_architecture(weights.space(), rng);
        const int batch_count = pretrain_phase ? schedule.pretrain_batch : schedule.finetune_batch;
        std::vector<int> indices(static_cast<size_t>(batch_count));
        for (auto& idx : indices) idx = rng.uniform_int(train_split.count());

        PathNetwork net(weights, arch, head, BnStatsMode::kShared);
        const Tensor batch = gather_images(train_split, indices);
        const LabelBatch target = gather_label_batch(train_split, indices, task);

        net.zero_grads();
        const Tensor out = net.forward(batch, ForwardMode::kTrain);
        Tensor grad;
        const double loss = task_loss(out, target, task, &grad);
        if (!std::isfinite(loss))
            throw NumericError("train_supernet: non-finite loss at iteration " + std::to_string(it) +
                               " on path " + format_architecture(arch));
        net.backward(grad);

        for (auto& p : net.parameters())
            sgd_step(*p.value, *p.grad, velocities.velocity_for(*p.value), sgd, it);

        log.push_back({it, sgd.learning_rate(it), loss});
        weights.set_step(weights.step() + 1);
    }

    weights.set_phase(pretrain_phase ? Phase::kPretrained : Phase::kFinetuned);
    return log;
}

// ---------------------------------------------------------------------------
// evaluation

double task_metric(PathNetwork& net, const DatasetSplit& split, const TaskSpec& spec,
                   int eval_batch) {
    const int n = split.count();
    if (n == 0) throw ConfigError("task_metric: empty split");
    double weighted = 0.0;
    for (int begin = 0; begin < n; begin += eval_batch) {
        const int count = std::min(eval_batch, n - begin);
        std::vector<int> indices(static_cast<size_t>(count));
        for (int i = 0; i < count; ++i) indices[static_cast<size_t>(i)] = begin + i;
        const Tensor batch = gather_images(split, indices);
        const LabelBatch target = gather_label_batch(split, indices, spec);
        const Tensor out = net.forward(batch, ForwardMode::kEval);
        if (!out.all_finite())
            throw NumericError("task_metric: non-finite network output on eval batch");
        weighted += metric_from_outputs(out, target, spec) * count;
    }
    return weighted / n;
}

double evaluate_path(SupernetWeights& weights, const Architecture& arch, const TaskSpec& task,
                     const DatasetSplit& calibration, const DatasetSplit& validation,
                     int eval_batch) {
    if (calibration.count() == 0) throw ConfigError("evaluate_path: empty calibration set");
    if (validation.count() == 0) throw ConfigError("evaluate_path: empty validation set");
    const HeadKind head = task.kind == TaskKind::kClassification ? HeadKind::kClassification
                                                                 : HeadKind::kLocalization;
    PathNetwork net(weights, arch, head, BnStatsMode::kPrivate);
    net.recalibrate(calibration.images);
    return task_metric(net, validation, task, eval_batch);
}

}  // namespace detnas
