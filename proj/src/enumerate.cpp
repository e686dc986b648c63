#include "scdesign/designs.hpp"
#include "scdesign/error.hpp"

#include <limits>
#include <numeric>

namespace scdesign {

SupportEnumerator::SupportEnumerator(int J, int m_lo, int m_hi, std::optional<Budget> budget)
    : J_(J), m_lo_(m_lo), m_hi_(m_hi), budget_(std::move(budget)), size_(m_lo) {
    if (J < 1 || m_lo < 1 || m_lo > m_hi || m_hi > J) {
        throw Error(ErrorCode::InvalidArgument, "support bounds must satisfy 1 <= m_lo <= m_hi <= J");
    }
    if (budget_ && budget_->cost.size() != J) {
        throw Error(ErrorCode::DimensionMismatch, "budget cost vector length differs from J");
    }
}

bool SupportEnumerator::advance_raw() {
    if (!started_) {
        started_ = true;
        current_.resize(size_);
        std::iota(current_.begin(), current_.end(), 0);
        return true;
    }
    // Next k-combination in lexicographic order.
    const int k = size_;
    int i = k - 1;
    while (i >= 0 && current_[i] == J_ - k + i) --i;
    if (i >= 0) {
        ++current_[i];
        for (int a = i + 1; a < k; ++a) current_[a] = current_[a - 1] + 1;
        return true;
    }
    if (++size_ > m_hi_) return false;
    current_.resize(size_);
    std::iota(current_.begin(), current_.end(), 0);
    return true;
}

bool SupportEnumerator::admissible() const {
    if (!budget_) return true;
    double cost = 0.0;
    for (const int j : current_) cost += budget_->cost(j);
    return cost <= budget_->bound;
}

bool SupportEnumerator::next() {
    while (advance_raw()) {
        if (admissible()) return true;
    }
    return false;
}

std::vector<std::vector<int>> enumerate_supports(int J, int m_lo, int m_hi, const std::optional<Budget>& budget) {
    SupportEnumerator it(J, m_lo, m_hi, budget);
    std::vector<std::vector<int>> out;
    while (it.next()) out.push_back(it.current());
    return out;
}

std::uint64_t count_supports(int J, int m_lo, int m_hi) {
    constexpr auto kMax = std::numeric_limits<std::uint64_t>::max();
    std::uint64_t total = 0;
    for (int k = m_lo; k <= m_hi; ++k) {
        // C(J, k) through the multiplicative formula in 128-bit arithmetic.
        unsigned __int128 c = 1;
        bool overflow = false;
        for (int i = 1; i <= k; ++i) {
            c = c * static_cast<unsigned>(J - k + i) / static_cast<unsigned>(i);
            if (c > kMax) {
                overflow = true;
                break;
            }
        }
        if (overflow || total > kMax - static_cast<std::uint64_t>(c)) return kMax;
        total += static_cast<std::uint64_t>(c);
    }
    return total;
}

}  // namespace scdesign
