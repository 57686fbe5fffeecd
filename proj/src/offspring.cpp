#include "gwtrace/offspring.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <set>

namespace gwtrace {

namespace {

constexpr double kMassTolerance = 1e-12;

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

}  // namespace

OffspringDist make_offspring(std::vector<std::pair<std::uint32_t, double>> pmf) {
    if (pmf.empty()) throw DomainError("offspring pmf must be nonempty");

    std::sort(pmf.begin(), pmf.end());
    double mass = 0.0;
    std::set<std::uint32_t> seen;
    for (const auto& [k, p] : pmf) {
        if (k == 0)
            throw ZeroOffspringError(
                "offspring pmf puts mass on 0 children; trees must never die out");
        if (!seen.insert(k).second)
            throw DomainError("offspring pmf repeats support value " +
                              std::to_string(k));
        if (!(p > 0.0) || !std::isfinite(p))
            throw DomainError("offspring probabilities must be finite and > 0");
        mass += p;
    }
    if (std::abs(mass - 1.0) > kMassTolerance)
        throw BadMassError("offspring probabilities sum to " +
                           std::to_string(mass) + ", not 1 within 1e-12");

    OffspringDist d;
    d.support_.reserve(pmf.size());
    d.probs_.reserve(pmf.size());
    for (const auto& [k, p] : pmf) {
        d.support_.push_back(k);
        d.probs_.push_back(p / mass);
    }

    double mean = 0.0, g2 = 0.0;
    for (std::size_t i = 0; i < d.support_.size(); ++i) {
        mean += d.probs_[i] * d.support_[i];
        g2 += d.probs_[i] * static_cast<double>(d.support_[i]) * d.support_[i];
    }
    d.mean_ = mean;
    d.g2_ = g2;
    d.var_ = g2 - mean * mean;
    if (d.var_ < 0) d.var_ = 0;  // rounding guard for near-degenerate laws

    if (!(mean > 1.0))
        throw SubcriticalError("offspring mean is " + std::to_string(mean) +
                               "; supercritical growth needs mean > 1");

    d.cumulative_.resize(d.probs_.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < d.probs_.size(); ++i) {
        acc += d.probs_[i];
        d.cumulative_[i] = acc;
    }
    d.cumulative_.back() = 1.0;
    return d;
}

double OffspringDist::pgf(double s) const {
    if (!(s >= 0.0 && s <= 1.0))
        throw DomainError("pgf argument must lie in [0, 1]");
    double acc = 0.0;
    for (std::size_t i = 0; i < support_.size(); ++i)
        acc += probs_[i] * std::pow(s, static_cast<double>(support_[i]));
    return acc;
}

double OffspringDist::pgf_complement(double s) const {
    if (!(s >= 0.0 && s <= 1.0))
        throw DomainError("pgf_complement argument must lie in [0, 1]");
    // 1 - sum p_k (1-s)^k = sum p_k (1 - (1-s)^k), each bracket evaluated as
    // -expm1(k log1p(-s)) so no digits cancel for small s.
    if (s == 1.0) return 1.0;
    const double l = std::log1p(-s);
    double acc = 0.0;
    for (std::size_t i = 0; i < support_.size(); ++i)
        acc += probs_[i] * (-std::expm1(static_cast<double>(support_[i]) * l));
    return acc;
}

OffspringDist OffspringDist::size_biased() const {
    std::vector<std::pair<std::uint32_t, double>> pmf;
    pmf.reserve(support_.size());
    for (std::size_t i = 0; i < support_.size(); ++i)
        pmf.emplace_back(support_[i], support_[i] * probs_[i] / mean_);
    return make_offspring(std::move(pmf));
}

std::string OffspringDist::to_string() const {
    if (is_deterministic()) return "det:" + std::to_string(support_[0]);
    std::string out;
    char buf[64];
    for (std::size_t i = 0; i < support_.size(); ++i) {
        if (i) out += ',';
        std::snprintf(buf, sizeof buf, "%u:%.17g", support_[i], probs_[i]);
        out += buf;
    }
    return out;
}

OffspringDist parse_offspring_spec(const std::string& spec) {
    const std::string s = trim(spec);
    if (s.empty()) throw ConfigError("empty offspring spec");

    if (s.rfind("det:", 0) == 0) {
        const std::string num = trim(s.substr(4));
        char* end = nullptr;
        const unsigned long k = std::strtoul(num.c_str(), &end, 10);
        if (num.empty() || end != num.c_str() + num.size() || k == 0 ||
            k > 0xFFFFFFFFul)
            throw ConfigError("bad offspring spec '" + spec +
                              "': det: needs a positive integer");
        return make_offspring({{static_cast<std::uint32_t>(k), 1.0}});
    }

    std::vector<std::pair<std::uint32_t, double>> pmf;
    std::size_t pos = 0;
    while (pos <= s.size()) {
        std::size_t comma = s.find(',', pos);
        if (comma == std::string::npos) comma = s.size();
        const std::string item = trim(s.substr(pos, comma - pos));
        pos = comma + 1;
        if (item.empty())
            throw ConfigError("bad offspring spec '" + spec + "': empty entry");
        const std::size_t colon = item.find(':');
        if (colon == std::string::npos)
            throw ConfigError("bad offspring spec '" + spec +
                              "': entries look like value:probability");
        const std::string ks = trim(item.substr(0, colon));
        const std::string ps = trim(item.substr(colon + 1));
        char* end = nullptr;
        const unsigned long k = std::strtoul(ks.c_str(), &end, 10);
        if (ks.empty() || end != ks.c_str() + ks.size() || k > 0xFFFFFFFFul)
            throw ConfigError("bad offspring spec '" + spec +
                              "': unparseable support value '" + ks + "'");
        end = nullptr;
        const double p = std::strtod(ps.c_str(), &end);
        if (ps.empty() || end != ps.c_str() + ps.size())
            throw ConfigError("bad offspring spec '" + spec +
                              "': unparseable probability '" + ps + "'");
        pmf.emplace_back(static_cast<std::uint32_t>(k), p);
        if (comma == s.size()) break;
    }
    return make_offspring(std::move(pmf));
}

}  // namespace gwtrace
