#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "detnas/rng.hpp"
#include "detnas/tensor.hpp"

namespace detnas {

enum class TaskKind { kClassification, kLocalization };

struct TaskSpec {
    TaskKind kind = TaskKind::kClassification;
    int resolution = 32;
    int classes = 4;  // classification only; localization outputs 4 box coordinates

    const char* loss_id() const;
    const char* metric_id() const;
};

enum class SplitRole {
    kPretrainTrain,
    kPretrainVal,
    kFinetuneTrain,
    kSearchValidation,
    kTest,
    kBnCalibration,
};

struct DatasetSplit {
    SplitRole role = SplitRole::kPretrainTrain;
    Tensor images;            // (count, 3, res, res)
    std::vector<int> labels;  // classification targets
    Tensor boxes;             // (count, 4) normalized (cx, cy, w, h)
    uint64_t seed = 0;

    int count() const { return images.rank() ? images.dim(0) : 0; }
};

// Oriented sinusoidal patterns, one (angle, frequency) pair per class, with
// random phase/contrast per image and additive Gaussian noise. Labels are
// balanced to within 1 (class of item i is i mod k).
DatasetSplit generate_classification_data(int classes, int count, int resolution, double noise,
                                          Rng& rng, SplitRole role);

// One bright axis-aligned rectangle (w, h >= 4 px, fully inside the image)
// on a faintly textured noisy background; label = (cx, cy, w, h) in [0,1].
DatasetSplit generate_localization_data(int count, int resolution, double noise, Rng& rng,
                                        SplitRole role);

struct ClassificationData {
    TaskSpec spec;
    DatasetSplit train;
    DatasetSplit val;
};

struct LocalizationData {
    TaskSpec spec;
    DatasetSplit train;
    DatasetSplit search_val;  // disjoint from train by construction
    DatasetSplit test;
    DatasetSplit calibration;  // subset of train
};

ClassificationData make_classification_data(int classes, int train_count, int val_count,
                                            int resolution, double noise, uint64_t seed);

LocalizationData make_localization_data(int train_count, int search_val_count, int test_count,
                                        int calibration_count, int resolution, double noise,
                                        uint64_t seed);

// Axis-aligned box as corner coordinates.
struct Box {
    double x0 = 0, y0 = 0, x1 = 0, y1 = 0;

    static Box from_center_size(double cx, double cy, double w, double h) {
        return {cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2};
    }
    static Box from_corner_size(double x, double y, double w, double h) {
        return {x, y, x + w, y + h};
    }
    double area() const { return std::max(0.0, x1 - x0) * std::max(0.0, y1 - y0); }
};

// Intersection over union; 1 iff the boxes coincide, 0 when disjoint.
double iou(const Box& a, const Box& b);

// Batch gather helpers (copies).
Tensor gather_images(const DatasetSplit& split, const std::vector<int>& indices);
std::vector<int> gather_labels(const DatasetSplit& split, const std::vector<int>& indices);
Tensor gather_boxes(const DatasetSplit& split, const std::vector<int>& indices);

struct LabelBatch {
    std::vector<int> labels;  // classification
    Tensor boxes;             // localization
};

LabelBatch gather_label_batch(const DatasetSplit& split, const std::vector<int>& indices,
                              const TaskSpec& spec);

// Loss of a head-output batch and its gradient. Classification expects
// logits (N, classes) and uses softmax cross-entropy; localization expects
// sigmoid-bounded coordinates (N, 4) and uses smooth-L1.
double task_loss(const Tensor& head_output, const LabelBatch& target, const TaskSpec& spec,
                 Tensor* grad);

// Top-1 accuracy or mean IoU of a head-output batch, in [0,1].
double metric_from_outputs(const Tensor& head_output, const LabelBatch& target,
                           const TaskSpec& spec);

// Mean IoU on a split of the fixed prior box (centered, mean label size),
// the brute-force baseline a trained localizer must beat.
double centered_prior_iou(const DatasetSplit& split);

}  // namespace detnas
