#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <numbers>
#include <span>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "starmap/errors.hpp"
#include "starmap/geometry.hpp"

namespace starmap {

// Squared-exponential kernel k(a, b) = signal * exp(-|a - b|^2 / (2 l^2)) with
// i.i.d. observation noise and a constant prior mean.
struct KernelConfig {
    double signal_variance = 1.0;
    double length_scale = 1.0;  // meters
    double noise_variance = 1e-4;
    double prior_mean = 0.0;

    double operator()(Point a, Point b) const {
        const Point d = a - b;
        return signal_variance * std::exp(-dot(d, d) / (2.0 * length_scale * length_scale));
    }

    void validate() const {
        if (!(signal_variance > 0.0) || !(length_scale > 0.0) || !(noise_variance >= 0.0) || !std::isfinite(prior_mean))
            throw InvalidArgument("kernel needs signal_variance > 0, length_scale > 0, noise_variance >= 0");
    }

    friend bool operator==(const KernelConfig&, const KernelConfig&) = default;
};

struct GpPrediction {
    double mean = 0.0;
    double stddev = 0.0;
};

// Exact GP regression posterior. Duplicate inputs are merged (targets averaged)
// before (K + noise I) is factorized; if the factorization fails, diagonal
// jitter is escalated from 1e-10 to 1e-3 times the signal variance.
class GpModel {
public:
    GpModel(std::span<const Point> inputs, std::span<const double> targets, const KernelConfig& kernel) : kernel_(kernel) {
        kernel_.validate();
        if (inputs.size() != targets.size()) throw InvalidArgument("gp inputs and targets differ in length");
        merge_duplicates(inputs, targets);
        if (inputs_.size() < 2) throw InvalidArgument("gp needs at least 2 distinct training inputs");
        factorize();
    }

    std::span<const Point> inputs() const { return inputs_; }
    std::span<const double> targets() const { return targets_; }
    const KernelConfig& kernel() const { return kernel_; }
    double jitter() const { return jitter_; }
    std::size_t size() const { return inputs_.size(); }

    GpPrediction predict(Point x) const {
        const auto n = static_cast<Eigen::Index>(inputs_.size());
        Eigen::VectorXd k(n);
        for (Eigen::Index i = 0; i < n; ++i) k[i] = kernel_(inputs_[i], x);
        const double mean = kernel_.prior_mean + k.dot(alpha_);
        llt_.matrixL().solveInPlace(k);
        const double var = kernel_.signal_variance + kernel_.noise_variance - k.squaredNorm();
        return {mean, std::sqrt(std::max(var, 0.0))};
    }

    // Batched form of predict(Point); chunked to bound memory.
    std::vector<GpPrediction> predict(std::span<const Point> xs) const {
        constexpr std::size_t chunk = 2048;
        const auto n = static_cast<Eigen::Index>(inputs_.size());
        std::vector<GpPrediction> out(xs.size());
        for (std::size_t start = 0; start < xs.size(); start += chunk) {
            const auto m = static_cast<Eigen::Index>(std::min(chunk, xs.size() - start));
            Eigen::MatrixXd k(n, m);
            for (Eigen::Index j = 0; j < m; ++j)
                for (Eigen::Index i = 0; i < n; ++i) k(i, j) = kernel_(inputs_[i], xs[start + j]);
            const Eigen::VectorXd means = k.transpose() * alpha_;
            llt_.matrixL().solveInPlace(k);
            for (Eigen::Index j = 0; j < m; ++j) {
                const double var = kernel_.signal_variance + kernel_.noise_variance - k.col(j).squaredNorm();
                out[start + j] = {kernel_.prior_mean + means[j], std::sqrt(std::max(var, 0.0))};
            }
        }
        return out;
    }

    // Posterior mean only; skips the triangular solve behind the variance.
    std::vector<double> predict_mean(std::span<const Point> xs) const {
        std::vector<double> out(xs.size());
        for (std::size_t j = 0; j < xs.size(); ++j) {
            double m = kernel_.prior_mean;
            for (std::size_t i = 0; i < inputs_.size(); ++i) m += kernel_(inputs_[i], xs[j]) * alpha_[static_cast<Eigen::Index>(i)];
            out[j] = m;
        }
        return out;
    }

    double log_marginal_likelihood() const {
        Eigen::VectorXd y(static_cast<Eigen::Index>(targets_.size()));
        for (std::size_t i = 0; i < targets_.size(); ++i) y[static_cast<Eigen::Index>(i)] = targets_[i] - kernel_.prior_mean;
        double log_det = 0.0;
        for (Eigen::Index i = 0; i < y.size(); ++i) log_det += std::log(llt_.matrixLLT()(i, i));
        return -0.5 * y.dot(alpha_) - log_det - 0.5 * static_cast<double>(y.size()) * std::log(2.0 * std::numbers::pi);
    }

    // Refit with extra training data and the same hyperparameters.
    GpModel extended(std::span<const Point> inputs, std::span<const double> targets) const {
        std::vector<Point> xs(inputs_.begin(), inputs_.end());
        std::vector<double> ys(targets_.begin(), targets_.end());
        xs.insert(xs.end(), inputs.begin(), inputs.end());
        ys.insert(ys.end(), targets.begin(), targets.end());
        return GpModel(xs, ys, kernel_);
    }

private:
    void merge_duplicates(std::span<const Point> inputs, std::span<const double> targets) {
        std::map<Point, std::size_t> seen;
        std::vector<std::size_t> counts;
        for (std::size_t i = 0; i < inputs.size(); ++i) {
            if (!is_finite(inputs[i]) || !std::isfinite(targets[i])) throw InvalidArgument("gp training data must be finite");
            const auto [it, inserted] = seen.try_emplace(inputs[i], inputs_.size());
            if (inserted) {
                inputs_.push_back(inputs[i]);
                targets_.push_back(targets[i]);
                counts.push_back(1);
            } else {
                targets_[it->second] += targets[i];
                ++counts[it->second];
            }
        }
        for (std::size_t i = 0; i < targets_.size(); ++i) targets_[i] /= static_cast<double>(counts[i]);
    }

    void factorize() {
        const auto n = static_cast<Eigen::Index>(inputs_.size());
        Eigen::MatrixXd K(n, n);
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = 0; j <= i; ++j) K(i, j) = K(j, i) = kernel_(inputs_[i], inputs_[j]);
        K.diagonal().array() += kernel_.noise_variance;
        for (double jitter = 0.0;;) {
            Eigen::MatrixXd A = K;
            A.diagonal().array() += jitter;
            llt_.compute(A);
            if (llt_.info() == Eigen::Success) {
                jitter_ = jitter;
                break;
            }
            jitter = jitter == 0.0 ? 1e-10 * kernel_.signal_variance : jitter * 10.0;
            if (jitter > 1e-3 * kernel_.signal_variance) throw FieldError("gp kernel matrix is not positive definite after jitter escalation");
        }
        Eigen::VectorXd y(n);
        for (Eigen::Index i = 0; i < n; ++i) y[i] = targets_[static_cast<std::size_t>(i)] - kernel_.prior_mean;
        alpha_ = llt_.solve(y);
    }

    KernelConfig kernel_;
    std::vector<Point> inputs_;
    std::vector<double> targets_;
    Eigen::LLT<Eigen::MatrixXd> llt_;
    Eigen::VectorXd alpha_;
    double jitter_ = 0.0;
};

inline GpModel gp_fit(std::span<const Point> inputs, std::span<const double> targets, const KernelConfig& kernel) {
    return GpModel(inputs, targets, kernel);
}

inline GpPrediction gp_predict(const GpModel& model, Point x) { return model.predict(x); }

// Default hyperparameters: prior mean and signal variance from the targets,
// length scale twice the spacing of a square lattice holding n_support points
// over extent, noise 1e-4 of the signal.
inline KernelConfig default_kernel(std::span<const double> targets, const BBox& extent, std::size_t n_support) {
    KernelConfig k;
    if (targets.empty()) throw InvalidArgument("default_kernel needs targets");
    double mean = 0.0;
    for (const double t : targets) mean += t;
    mean /= static_cast<double>(targets.size());
    double var = 0.0;
    for (const double t : targets) var += (t - mean) * (t - mean);
    var = targets.size() > 1 ? var / static_cast<double>(targets.size() - 1) : 0.0;
    k.prior_mean = mean;
    k.signal_variance = var > 0.0 ? var : std::max(1e-6, mean * mean);
    const double spacing = std::sqrt(extent.width() * extent.height() / static_cast<double>(std::max<std::size_t>(n_support, 1)));
    k.length_scale = 2.0 * (spacing > 0.0 ? spacing : 1.0);
    k.noise_variance = 1e-4 * k.signal_variance;
    return k;
}

// Marginal-likelihood search over a 5x5 log grid (factors 1/4..4) of length
// scale and signal variance around start; the noise ratio is kept.
inline KernelConfig tune_kernel(std::span<const Point> inputs, std::span<const double> targets, const KernelConfig& start) {
    static constexpr double factors[] = {0.25, 0.5, 1.0, 2.0, 4.0};
    const double noise_ratio = start.noise_variance / start.signal_variance;
    KernelConfig best = start;
    double best_lml = -std::numeric_limits<double>::infinity();
    for (const double fl : factors) {
        for (const double fs : factors) {
            KernelConfig k = start;
            k.length_scale = start.length_scale * fl;
            k.signal_variance = start.signal_variance * fs;
            k.noise_variance = noise_ratio * k.signal_variance;
            try {
                const double lml = GpModel(inputs, targets, k).log_marginal_likelihood();
                if (lml > best_lml) {
                    best_lml = lml;
                    best = k;
                }
            } catch (const FieldError&) {
                // skip hyperparameters that cannot be factorized
            }
        }
    }
    return best;
}

}  // namespace starmap
