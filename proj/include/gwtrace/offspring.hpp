#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "gwtrace/errors.hpp"
#include "gwtrace/rng.hpp"

namespace gwtrace {

// Offspring law of a supercritical branching process.
//
// Finite support on k >= 1 with mean m > 1; together these force unbounded
// growth with probability one, which everything downstream relies on.
// Probabilities must sum to 1 within 1e-12 on input and are renormalized
// exactly so that sums over the stored values hit 1.0 up to rounding.
class OffspringDist {
public:
    const std::vector<std::uint32_t>& support() const { return support_; }
    const std::vector<double>& probs() const { return probs_; }

    double mean() const { return mean_; }
    double variance() const { return var_; }
    // E(G^2); shows up in fluctuation constants as g2.
    double second_moment() const { return g2_; }
    std::uint32_t min_support() const { return support_.front(); }
    std::uint32_t max_support() const { return support_.back(); }
    bool is_deterministic() const { return support_.size() == 1; }

    // E(s^G) for s in [0, 1].
    double pgf(double s) const;

    // 1 - pgf(1 - s), computed to full relative precision for small s,
    // where the direct form loses every significant digit.
    double pgf_complement(double s) const;

    // One draw consumes exactly one uniform, so consumption is a fixed
    // function of draw count and streams can be replayed or shared.
    std::uint32_t sample(RngStream& rng) const {
        const double u = rng.uniform01();
        std::size_t i = 0;
        while (i + 1 < cumulative_.size() && u >= cumulative_[i]) ++i;
        return support_[i];
    }

    // Law with mass proportional to k * p_k; the step law of the always
    // surviving lineage in the size-biased process.
    OffspringDist size_biased() const;

    // Round-trips through parse_offspring_spec.
    std::string to_string() const;

    friend OffspringDist make_offspring(
        std::vector<std::pair<std::uint32_t, double>> pmf);

private:
    OffspringDist() = default;
    std::vector<std::uint32_t> support_;
    std::vector<double> probs_;
    std::vector<double> cumulative_;  // inclusive prefix sums, last = 1
    double mean_ = 0.0;
    double var_ = 0.0;
    double g2_ = 0.0;
};

// Validates and normalizes a pmf given as (value, probability) pairs.
// Throws ZeroOffspringError, SubcriticalError, BadMassError, DomainError.
OffspringDist make_offspring(std::vector<std::pair<std::uint32_t, double>> pmf);

// Text forms: "1:0.5,3:0.5" lists value:probability pairs, "det:2" is the
// point mass at 2.  Whitespace around tokens is ignored.
OffspringDist parse_offspring_spec(const std::string& spec);

}  // namespace gwtrace
