#include "scdesign/designs.hpp"
#include "scdesign/error.hpp"
#include "scdesign/rng.hpp"

#include <limits>

namespace scdesign {

namespace {

constexpr int kMaxLloydIterations = 300;

struct Run {
    std::vector<int> labels;
    double inertia = std::numeric_limits<double>::infinity();
    bool ok = false;
};

int nearest(const Matrix& centers, const Eigen::Ref<const Vector>& x, double* dist_out) {
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (int k = 0; k < centers.cols(); ++k) {
        const double d = (centers.col(k) - x).squaredNorm();
        if (d < best_d) {
            best_d = d;
            best = k;
        }
    }
    if (dist_out) *dist_out = best_d;
    return best;
}

Run lloyd(const Matrix& X, const Vector& f, int K, Rng& rng) {
    const int J = static_cast<int>(X.cols());
    Matrix centers(X.rows(), K);

    // k-means++ seeding with probabilities proportional to f_j * D(j)^2.
    {
        double total = f.sum();
        double u = rng.uniform() * total;
        int first = J - 1;
        for (int j = 0; j < J; ++j) {
            u -= f(j);
            if (u < 0.0) {
                first = j;
                break;
            }
        }
        centers.col(0) = X.col(first);
        Vector d2(J);
        for (int j = 0; j < J; ++j) d2(j) = (X.col(j) - centers.col(0)).squaredNorm();
        for (int k = 1; k < K; ++k) {
            const Vector mass = f.cwiseProduct(d2);
            total = mass.sum();
            int pick = -1;
            if (total > 0.0) {
                u = rng.uniform() * total;
                for (int j = 0; j < J; ++j) {
                    if (mass(j) <= 0.0) continue;
                    pick = j;
                    u -= mass(j);
                    if (u < 0.0) break;
                }
            } else {
                pick = static_cast<int>(rng.below(static_cast<std::uint64_t>(J)));
            }
            centers.col(k) = X.col(pick);
            for (int j = 0; j < J; ++j) d2(j) = std::min(d2(j), (X.col(j) - centers.col(k)).squaredNorm());
        }
    }

    Run run;
    run.labels.assign(J, -1);
    for (int iter = 0; iter < kMaxLloydIterations; ++iter) {
        bool changed = false;
        for (int j = 0; j < J; ++j) {
            const int k = nearest(centers, X.col(j), nullptr);
            if (k != run.labels[j]) {
                run.labels[j] = k;
                changed = true;
            }
        }
        Matrix sums = Matrix::Zero(X.rows(), K);
        Vector mass = Vector::Zero(K);
        for (int j = 0; j < J; ++j) {
            sums.col(run.labels[j]) += f(j) * X.col(j);
            mass(run.labels[j]) += f(j);
        }
        for (int k = 0; k < K; ++k) {
            if (mass(k) > 0.0) centers.col(k) = sums.col(k) / mass(k);
        }
        if (!changed && iter > 0) break;
    }

    Vector mass = Vector::Zero(K);
    run.inertia = 0.0;
    for (int j = 0; j < J; ++j) {
        mass(run.labels[j]) += f(j);
        run.inertia += f(j) * (X.col(j) - centers.col(run.labels[j])).squaredNorm();
    }
    run.ok = (mass.array() > 0.0).all();
    return run;
}

}  // namespace

Clustering cluster_units(const PredictorSet& pred, int K, std::uint64_t seed, int restarts) {
    const int J = pred.J();
    if (K < 1 || K > J) throw Error(ErrorCode::InvalidArgument, "cluster count must satisfy 1 <= K <= J");
    if (restarts < 1) throw Error(ErrorCode::InvalidArgument, "restarts must be positive");

    Run best;
    for (int attempt = 0; attempt < restarts; ++attempt) {
        Rng rng = Rng::substream(seed, static_cast<std::uint64_t>(attempt));
        Run run = lloyd(pred.X, pred.f, K, rng);
        if (run.ok && run.inertia < best.inertia) best = std::move(run);
    }
    if (!best.ok) {
        throw Error(ErrorCode::EmptyClusterAfterConvergence,
                    "every restart left a cluster empty (K=" + std::to_string(K) + ")");
    }

    // Renumber clusters by first appearance in unit order.
    std::vector<int> relabel(K, -1);
    int next_label = 0;
    Clustering out;
    out.labels.resize(J);
    for (int j = 0; j < J; ++j) {
        int& target = relabel[best.labels[j]];
        if (target < 0) target = next_label++;
        out.labels[j] = target;
    }
    out.means = Matrix::Zero(pred.M(), K);
    out.mass = Vector::Zero(K);
    for (int j = 0; j < J; ++j) {
        out.means.col(out.labels[j]) += pred.f(j) * pred.X.col(j);
        out.mass(out.labels[j]) += pred.f(j);
    }
    for (int k = 0; k < K; ++k) out.means.col(k) /= out.mass(k);
    out.inertia = best.inertia;
    return out;
}

}  // namespace scdesign
