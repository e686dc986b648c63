#pragma once

#include "scdesign/error.hpp"
#include "scdesign/panel.hpp"

#include <filesystem>
#include <functional>
#include <random>
#include <string>

namespace testing {

using scdesign::Matrix;
using scdesign::Vector;

inline Matrix uniform_matrix(std::mt19937_64& gen, int rows, int cols, double lo = 0.0, double hi = 1.0) {
    std::uniform_real_distribution<double> dist(lo, hi);
    Matrix out(rows, cols);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) out(i, j) = dist(gen);
    return out;
}

// Predictor set built directly from a matrix, bypassing panel assembly.
inline scdesign::PredictorSet predictors_from(const Matrix& X, const Vector& f) {
    scdesign::PredictorSet p;
    p.X = X;
    p.f = f / f.sum();
    p.Xbar = X * p.f;
    p.scale = Vector::Ones(X.rows());
    p.zero_variance.assign(static_cast<std::size_t>(X.rows()), false);
    return p;
}

inline scdesign::PredictorSet predictors_from(const Matrix& X) {
    return predictors_from(X, Vector::Constant(X.cols(), 1.0 / static_cast<double>(X.cols())));
}

// Code of the scdesign::Error thrown by fn, or Internal when nothing is thrown.
inline scdesign::ErrorCode code_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const scdesign::Error& e) {
        return e.code();
    }
    return scdesign::ErrorCode::Internal;
}

class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() / ("scdesign_" + tag + "_" + std::to_string(rd()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

}  // namespace testing
