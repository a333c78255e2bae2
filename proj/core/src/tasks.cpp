#include "detnas/tasks.hpp"

#include <algorithm>
#include <cmath>

#include "detnas/errors.hpp"
#include "detnas/nn_ops.hpp"

namespace detnas {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

const char* TaskSpec::loss_id() const {
    return kind == TaskKind::kClassification ? "softmax_cross_entropy" : "smooth_l1";
}

const char* TaskSpec::metric_id() const {
    return kind == TaskKind::kClassification ? "top1_accuracy" : "mean_iou";
}

DatasetSplit generate_classification_data(int classes, int count, int resolution, double noise,
                                          Rng& rng, SplitRole role) {
    if (classes < 2) throw ConfigError("classification data: need at least 2 classes");
    if (count <= 0 || resolution <= 0) throw ConfigError("classification data: count and resolution must be positive");
    DatasetSplit split;
    split.role = role;
    split.images = Tensor({count, 3, resolution, resolution});
    split.labels.resize(static_cast<size_t>(count));

    const size_t plane = static_cast<size_t>(resolution) * resolution;
    float* img = split.images.data();
    for (int i = 0; i < count; ++i) {
        const int c = i % classes;
        split.labels[static_cast<size_t>(i)] = c;
        const double angle = kPi * c / classes;
        const double freq = 2.0 + (c % 3);
        const double phase = rng.uniform_double() * 2.0 * kPi;
        const double contrast = 0.6 + 0.4 * rng.uniform_double();
        const double ca = std::cos(angle), sa = std::sin(angle);
        float* base = img + static_cast<size_t>(i) * 3 * plane;
        for (int y = 0; y < resolution; ++y) {
            for (int x = 0; x < resolution; ++x) {
                const double u = static_cast<double>(x) / resolution;
                const double v = static_cast<double>(y) / resolution;
                const double t = 2.0 * kPi * freq * (u * ca + v * sa) + phase;
                const size_t p = static_cast<size_t>(y) * resolution + x;
                base[p] = static_cast<float>(contrast * std::sin(t));
                base[plane + p] = static_cast<float>(contrast * std::cos(t));
                base[2 * plane + p] = static_cast<float>(contrast * std::sin(2.0 * t) * 0.5);
            }
        }
        if (noise > 0) {
            for (size_t p = 0; p < 3 * plane; ++p)
                base[p] += static_cast<float>(noise * rng.normal());
        }
    }
    return split;
}

DatasetSplit generate_localization_data(int count, int resolution, double noise, Rng& rng,
                                        SplitRole role) {
    if (resolution < 16) throw ConfigError("localization data: resolution must be at least 16");
    if (count <= 0) throw ConfigError("localization data: count must be positive");
    DatasetSplit split;
    split.role = role;
    split.images = Tensor({count, 3, resolution, resolution});
    split.boxes = Tensor({count, 4});

    const size_t plane = static_cast<size_t>(resolution) * resolution;
    const int max_side = resolution / 2;
    float* img = split.images.data();
    float* boxes = split.boxes.data();
    for (int i = 0; i < count; ++i) {
        const int bw = 4 + rng.uniform_int(max_side - 4 + 1);
        const int bh = 4 + rng.uniform_int(max_side - 4 + 1);
        const int bx = rng.uniform_int(resolution - bw + 1);
        const int by = rng.uniform_int(resolution - bh + 1);
        const double brightness = 0.8 + 0.4 * rng.uniform_double();
        const double phase = rng.uniform_double() * 2.0 * kPi;

        float* base = img + static_cast<size_t>(i) * 3 * plane;
        for (int y = 0; y < resolution; ++y) {
            for (int x = 0; x < resolution; ++x) {
                const double u = static_cast<double>(x) / resolution;
                const double v = static_cast<double>(y) / resolution;
                const double texture = 0.15 * std::sin(2.0 * kPi * 3.0 * (0.866 * u + 0.5 * v) + phase);
                const bool inside = x >= bx && x < bx + bw && y >= by && y < by + bh;
                const float value = static_cast<float>(texture + (inside ? brightness : 0.0));
                const size_t p = static_cast<size_t>(y) * resolution + x;
                base[p] = value;
                base[plane + p] = value;
                base[2 * plane + p] = value;
            }
        }
        if (noise > 0) {
            for (size_t p = 0; p < 3 * plane; ++p)
                base[p] += static_cast<float>(noise * rng.normal());
        }
        boxes[static_cast<size_t>(i) * 4 + 0] = static_cast<float>((bx + bw / 2.0) / resolution);
        boxes[static_cast<size_t>(i) * 4 + 1] = static_cast<float>((by + bh / 2.0) / resolution);
        boxes[static_cast<size_t>(i) * 4 + 2] = static_cast<float>(static_cast<double>(bw) / resolution);
        boxes[static_cast<size_t>(i) * 4 + 3] = static_cast<float>(static_cast<double>(bh) / resolution);
    }
    return split;
}

ClassificationData make_classification_data(int classes, int train_count, int val_count,
                                            int resolution, double noise, uint64_t seed) {
    ClassificationData data;
    data.spec = TaskSpec{TaskKind::kClassification, resolution, classes};
    Rng rng(seed);
    data.train = generate_classification_data(classes, train_count, resolution, noise, rng,
                                              SplitRole::kPretrainTrain);
    data.val = generate_classification_data(classes, val_count, resolution, noise, rng,
                                            SplitRole::kPretrainVal);
    data.train.seed = seed;
    data.val.seed = seed;
    return data;
}

namespace {

DatasetSplit slice_split(const DatasetSplit& pool, int begin, int count, SplitRole role) {
    DatasetSplit out;
    out.role = role;
    out.seed = pool.seed;
    const int res_h = pool.images.dim(2), res_w = pool.images.dim(3);
    out.images = Tensor({count, 3, res_h, res_w});
    const size_t item = static_cast<size_t>(3) * res_h * res_w;
    std::copy(pool.images.data() + static_cast<size_t>(begin) * item,
              pool.images.data() + static_cast<size_t>(begin + count) * item, out.images.data());
    if (pool.boxes.rank()) {
        out.boxes = Tensor({count, 4});
        std::copy(pool.boxes.data() + static_cast<size_t>(begin) * 4,
                  pool.boxes.data() + static_cast<size_t>(begin + count) * 4, out.boxes.data());
    }
    if (!pool.labels.empty())
        out.labels.assign(pool.labels.begin() + begin, pool.labels.begin() + begin + count);
    return out;
}

}  // namespace

LocalizationData make_localization_data(int train_count, int search_val_count, int test_count,
                                        int calibration_count, int resolution, double noise,
                                        uint64_t seed) {
    if (calibration_count <= 0 || calibration_count > train_count)
        throw ConfigError("localization data: calibration set must be a non-empty subset of the training split");
    LocalizationData data;
    data.spec = TaskSpec{TaskKind::kLocalization, resolution, 0};
    Rng rng(seed);
    // One pool, partitioned in order: train | search_val | test. Membership
    // of the three splits is disjoint by construction.
    DatasetSplit pool = generate_localization_data(train_count + search_val_count + test_count,
                                                   resolution, noise, rng, SplitRole::kFinetuneTrain);
    pool.seed = seed;
    data.train = slice_split(pool, 0, train_count, SplitRole::kFinetuneTrain);
    data.search_val = slice_split(pool, train_count, search_val_count, SplitRole::kSearchValidation);
    data.test = slice_split(pool, train_count + search_val_count, test_count, SplitRole::kTest);
    data.calibration = slice_split(pool, 0, calibration_count, SplitRole::kBnCalibration);
    return data;
}

double iou(const Box& a, const Box& b) {
    const double ix = std::max(0.0, std::min(a.x1, b.x1) - std::max(a.x0, b.x0));
    const double iy = std::max(0.0, std::min(a.y1, b.y1) - std::max(a.y0, b.y0));
    const double inter = ix * iy;
    const double uni = a.area() + b.area() - inter;
    return uni > 0.0 ? inter / uni : 0.0;
}

Tensor gather_images(const DatasetSplit& split, const std::vector<int>& indices) {
    const int res_h = split.images.dim(2), res_w = split.images.dim(3);
    Tensor out({static_cast<int>(indices.size()), 3, res_h, res_w});
    const size_t item = static_cast<size_t>(3) * res_h * res_w;
    for (size_t i = 0; i < indices.size(); ++i)
        std::copy(split.images.data() + static_cast<size_t>(indices[i]) * item,
                  split.images.data() + static_cast<size_t>(indices[i] + 1) * item,
                  out.data() + i * item);
    return out;
}

std::vector<int> gather_labels(const DatasetSplit& split, const std::vector<int>& indices) {
    std::vector<int> out(indices.size());
    for (size_t i = 0; i < indices.size(); ++i) out[i] = split.labels[static_cast<size_t>(indices[i])];
    return out;
}

Tensor gather_boxes(const DatasetSplit& split, const std::vector<int>& indices) {
    Tensor out({static_cast<int>(indices.size()), 4});
    for (size_t i = 0; i < indices.size(); ++i)
        std::copy(split.boxes.data() + static_cast<size_t>(indices[i]) * 4,
                  split.boxes.data() + static_cast<size_t>(indices[i] + 1) * 4, out.data() + i * 4);
    return out;
}

LabelBatch gather_label_batch(const DatasetSplit& split, const std::vector<int>& indices,
                              const TaskSpec& spec) {
    LabelBatch batch;
    if (spec.kind == TaskKind::kClassification)
        batch.labels = gather_labels(split, indices);
    else
        batch.boxes = gather_boxes(split, indices);
    return batch;
}

double task_loss(const Tensor& head_output, const LabelBatch& target, const TaskSpec& spec,
                 Tensor* grad) {
    if (spec.kind == TaskKind::kClassification) {
        Tensor probs;
        const float loss = nn::softmax_cross_entropy(head_output, target.labels, &probs);
        if (grad) *grad = nn::softmax_cross_entropy_backward(probs, target.labels);
        return loss;
    }
    const float loss = nn::smooth_l1(head_output, target.boxes);
    if (grad) *grad = nn::smooth_l1_backward(head_output, target.boxes);
    return loss;
}

double metric_from_outputs(const Tensor& head_output, const LabelBatch& target,
                           const TaskSpec& spec) {
    const int n = head_output.dim(0);
    if (n == 0) throw ConfigError("task_metric: empty batch");
    if (spec.kind == TaskKind::kClassification) {
        const int k = head_output.dim(1);
        int correct = 0;
        for (int i = 0; i < n; ++i) {
            const float* row = head_output.data() + static_cast<size_t>(i) * k;
            int best = 0;
            for (int j = 1; j < k; ++j)
                if (row[j] > row[best]) best = j;
            if (best == target.labels[static_cast<size_t>(i)]) ++correct;
        }
        return static_cast<double>(correct) / n;
    }
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
        const float* p = head_output.data() + static_cast<size_t>(i) * 4;
        const float* t = target.boxes.data() + static_cast<size_t>(i) * 4;
        total += iou(Box::from_center_size(p[0], p[1], p[2], p[3]),
                     Box::from_center_size(t[0], t[1], t[2], t[3]));
    }
    return total / n;
}

double centered_prior_iou(const DatasetSplit& split) {
    const int n = split.count();
    if (n == 0) throw ConfigError("centered_prior_iou: empty split");
    double mean_w = 0.0, mean_h = 0.0;
    for (int i = 0; i < n; ++i) {
        mean_w += split.boxes[static_cast<size_t>(i) * 4 + 2];
        mean_h += split.boxes[static_cast<size_t>(i) * 4 + 3];
    }
    mean_w /= n;
    mean_h /= n;
    const Box prior = Box::from_center_size(0.5, 0.5, mean_w, mean_h);
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
        const float* t = split.boxes.data() + static_cast<size_t>(i) * 4;
        total += iou(prior, Box::from_center_size(t[0], t[1], t[2], t[3]));
    }
    return total / n;
}

}  // namespace detnas
