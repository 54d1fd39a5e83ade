#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "unlearn/nn/network.hpp"
#include "unlearn/nn/tensor.hpp"

namespace unlearn::data {

/// Counts sample reads made through Dataset::gather. Shared by copies of a
/// Dataset so that tests can assert which stages touched which split.
struct AccessLog {
    std::atomic<std::size_t> gathers{0};
    std::atomic<std::size_t> samples{0};
};

struct Batch {
    Tensor images;              // [B, C, H, W]
    std::vector<int> labels;
    std::vector<std::size_t> indices;
    std::size_t size() const { return labels.size(); }
};

/// Labeled images with values in [0,1]. Immutable after construction.
class Dataset {
public:
    Dataset() = default;

    Dataset(std::string name, ImageShape shape, std::size_t num_classes, std::vector<double> pixels,
            std::vector<int> labels, std::vector<std::string> class_names = {})
        : name_(std::move(name)),
          shape_(shape),
          num_classes_(num_classes),
          pixels_(std::move(pixels)),
          labels_(std::move(labels)),
          class_names_(std::move(class_names)),
          log_(std::make_shared<AccessLog>()) {
        const std::size_t per = sample_size();
        if (per == 0) throw std::invalid_argument("dataset " + name_ + ": empty image shape");
        if (num_classes_ == 0) throw std::invalid_argument("dataset " + name_ + ": num_classes must be positive");
        if (pixels_.size() != labels_.size() * per)
            throw std::invalid_argument("dataset " + name_ + ": " + std::to_string(pixels_.size()) +
                                        " pixel values for " + std::to_string(labels_.size()) + " labels");
        for (std::size_t i = 0; i < labels_.size(); ++i)
            if (labels_[i] < 0 || static_cast<std::size_t>(labels_[i]) >= num_classes_)
                throw std::invalid_argument("dataset " + name_ + ": label " + std::to_string(labels_[i]) +
                                            " at index " + std::to_string(i) + " outside [0," +
                                            std::to_string(num_classes_) + ")");
        for (double v : pixels_)
            if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument("dataset " + name_ + ": pixel outside [0,1]");
        if (class_names_.empty())
            for (std::size_t k = 0; k < num_classes_; ++k) class_names_.push_back(std::to_string(k));
        if (class_names_.size() != num_classes_)
            throw std::invalid_argument("dataset " + name_ + ": class_names size mismatch");
    }

    const std::string& name() const { return name_; }
    ImageShape image_shape() const { return shape_; }
    std::size_t num_classes() const { return num_classes_; }
    std::size_t size() const { return labels_.size(); }
    bool empty() const { return labels_.empty(); }
    std::size_t sample_size() const { return shape_.channels * shape_.height * shape_.width; }
    const std::vector<int>& labels() const { return labels_; }
    const std::vector<std::string>& class_names() const { return class_names_; }

    /// Pixels of sample i (does not count as an access).
    std::span<const double> pixels(std::size_t i) const {
        return {pixels_.data() + i * sample_size(), sample_size()};
    }
    std::span<const double> all_pixels() const { return pixels_; }

    /// Images as a [N, C, H, W] tensor.
    Tensor images() const {
        return Tensor({size(), shape_.channels, shape_.height, shape_.width}, pixels_);
    }

    std::vector<std::size_t> class_counts() const {
        std::vector<std::size_t> counts(num_classes_, 0);
        for (int y : labels_) ++counts[static_cast<std::size_t>(y)];
        return counts;
    }

    /// Copies the listed samples into a batch and records the access.
    Batch gather(std::span<const std::size_t> indices) const {
        Batch b{Tensor({indices.size(), shape_.channels, shape_.height, shape_.width}), {}, {}};
        const std::size_t per = sample_size();
        b.labels.reserve(indices.size());
        for (std::size_t k = 0; k < indices.size(); ++k) {
            const std::size_t i = indices[k];
            if (i >= size()) throw std::out_of_range("dataset " + name_ + ": index " + std::to_string(i));
            std::copy_n(pixels_.data() + i * per, per, b.images.values.data() + k * per);
            b.labels.push_back(labels_[i]);
        }
        b.indices.assign(indices.begin(), indices.end());
        if (log_) {
            ++log_->gathers;
            log_->samples += indices.size();
        }
        return b;
    }

    /// New dataset holding the listed samples, in the given order, with its own access log.
    Dataset subset(std::span<const std::size_t> indices, std::string name) const {
        std::vector<double> px;
        std::vector<int> ys;
        px.reserve(indices.size() * sample_size());
        ys.reserve(indices.size());
        for (std::size_t i : indices) {
            if (i >= size()) throw std::out_of_range("dataset " + name_ + ": index " + std::to_string(i));
            auto p = pixels(i);
            px.insert(px.end(), p.begin(), p.end());
            ys.push_back(labels_[i]);
        }
        return Dataset(std::move(name), shape_, num_classes_, std::move(px), std::move(ys), class_names_);
    }

    /// First n samples (or all, if n >= size()).
    Dataset head(std::size_t n) const {
        std::vector<std::size_t> idx(std::min(n, size()));
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
        return subset(idx, name_);
    }

    std::size_t access_count() const { return log_ ? log_->gathers.load() : 0; }
    std::size_t samples_read() const { return log_ ? log_->samples.load() : 0; }

private:
    std::string name_;
    ImageShape shape_{};
    std::size_t num_classes_ = 0;
    std::vector<double> pixels_;
    std::vector<int> labels_;
    std::vector<std::string> class_names_;
    std::shared_ptr<AccessLog> log_;
};

} // namespace unlearn::data
