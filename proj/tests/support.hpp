#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "moco/image.hpp"
#include "moco/rng.hpp"
#include "moco/score.hpp"

namespace testsupport {

inline double rel_err(double got, double want) {
    const double denom = std::max(std::abs(want), 1e-300);
    return std::abs(got - want) / denom;
}

// Relative error with an absolute floor, for quantities that pass near zero.
inline double rel_err_floored(double got, double want, double floor_) {
    return std::abs(got - want) / std::max(std::abs(want), floor_);
}

inline moco::Image random_image(int h, int w, double spacing, moco::SeededRng& rng,
                                double lo = -1.0, double hi = 1.0) {
    moco::Image img(h, w, spacing);
    for (double& v : img.data) v = rng.uniform(lo, hi);
    return img;
}

// Test-only score with a constant (time-independent in shape) Jacobian:
//   score(x) = A (x - mu), Jacobian A supplied dense and symmetric-free.
class AffineScore : public moco::ScoreFunction {
public:
    AffineScore(std::vector<double> a_rowmajor, moco::Image mu)
        : a_(std::move(a_rowmajor)), mu_(std::move(mu)), d_(mu_.size()) {}

    moco::Image evaluate(const moco::Image& x, double) const override {
        moco::Image out = x.like();
        for (std::size_t i = 0; i < d_; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < d_; ++j)
                s += a_[i * d_ + j] * (x.data[j] - mu_.data[j]);
            out.data[i] = s;
        }
        return out;
    }

    moco::Image vjp(const moco::Image& x, double, const moco::Image& cot) const override {
        moco::Image out = x.like();
        for (std::size_t j = 0; j < d_; ++j) {
            double s = 0.0;
            for (std::size_t i = 0; i < d_; ++i) s += a_[i * d_ + j] * cot.data[i];
            out.data[j] = s;
        }
        return out;
    }

    moco::Image vjp_tangent(const moco::Image& x, double, const moco::Image&,
                            const moco::Image&) const override {
        return x.like();
    }

    double trace() const {
        double t = 0.0;
        for (std::size_t i = 0; i < d_; ++i) t += a_[i * d_ + i];
        return t;
    }

private:
    std::vector<double> a_;
    moco::Image mu_;
    std::size_t d_;
};

class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        path_ = std::filesystem::temp_directory_path() /
                ("moco_test_" + tag + "_" + std::to_string(::getpid()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    std::string file(const std::string& name) const { return (path_ / name).string(); }

private:
    std::filesystem::path path_;
};

}  // namespace testsupport
