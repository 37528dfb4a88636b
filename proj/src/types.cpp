#include "nmfrank/types.hpp"

#include <cmath>

namespace nmfrank {

const char* family_name(Family f) {
    return f == Family::poisson ? "poisson" : "gaussian";
}

Family family_from_name(const std::string& name) {
    if (name == "poisson") return Family::poisson;
    if (name == "gaussian" || name == "normal") return Family::gaussian;
    throw std::invalid_argument("unknown model family: " + name);
}

const char* method_name(Method m) {
    switch (m) {
        case Method::boot: return "boot";
        case Method::decon: return "decon";
        case Method::impute: return "impute";
    }
    return "?";
}

Method method_from_name(const std::string& name) {
    if (name == "boot") return Method::boot;
    if (name == "decon") return Method::decon;
    if (name == "impute") return Method::impute;
    throw std::invalid_argument("unknown method: " + name);
}

int max_rank_cap(Index p, Index n) {
    double ratio = static_cast<double>(p) * static_cast<double>(n) /
                   (static_cast<double>(n) + static_cast<double>(p));
    return static_cast<int>(std::floor(ratio)) - 1;
}

SelectionConfig validate(SelectionConfig config, const DataMatrix& data) {
    const Index p = data.rows();
    const Index n = data.cols();
    if (p < 1 || n < 1) throw DataError("empty data matrix");

    if (!(config.alpha > 0.0 && config.alpha < 1.0))
        throw std::invalid_argument("alpha must lie in (0,1), got " + std::to_string(config.alpha));
    if (config.bootstrap_size < 10)
        throw std::invalid_argument("bootstrap size must be >= 10, got " +
                                    std::to_string(config.bootstrap_size));
    if (config.starts < 1)
        throw std::invalid_argument("starts must be >= 1, got " + std::to_string(config.starts));
    if (config.k_start < 1)
        throw std::invalid_argument("k_start must be >= 1, got " + std::to_string(config.k_start));

    const int cap = max_rank_cap(p, n);
    if (cap < 1)
        throw std::invalid_argument("matrix too small for any testable rank (cap " +
                                    std::to_string(cap) + ")");
    if (config.k_max <= 0 || config.k_max > cap) config.k_max = cap;
    if (config.k_start > config.k_max)
        throw std::invalid_argument("k_start " + std::to_string(config.k_start) +
                                    " exceeds k_max " + std::to_string(config.k_max));

    if (!(config.mask_fraction > 0.0 && config.mask_fraction < 1.0))
        throw std::invalid_argument("mask fraction must lie in (0,1)");
    if (config.impute_repeats < 1) throw std::invalid_argument("impute repeats must be >= 1");
    for (int k : config.k_grid)
        if (k < 1 || k > config.k_max)
            throw std::invalid_argument("k_grid entry " + std::to_string(k) + " outside [1, k_max]");

    if (config.fit.max_iter < 1) throw std::invalid_argument("max_iter must be >= 1");
    if (!(config.fit.rel_tol > 0.0)) throw std::invalid_argument("rel_tol must be > 0");

    return config;
}

DataMatrix remove_zero_rows(DataMatrix m) {
    const Index p = m.rows();
    std::vector<Index> keep;
    keep.reserve(p);
    for (Index i = 0; i < p; ++i) {
        if ((m.values.row(i).array() != 0.0).any())
            keep.push_back(i);
        else
            m.removed_rows.push_back(m.row_labels.empty() ? std::to_string(i + 1)
                                                          : m.row_labels[i]);
    }
    if (static_cast<Index>(keep.size()) == p) return m;

    Matrix kept(static_cast<Index>(keep.size()), m.cols());
    std::vector<std::string> kept_labels;
    for (std::size_t r = 0; r < keep.size(); ++r) {
        kept.row(static_cast<Index>(r)) = m.values.row(keep[r]);
        if (!m.row_labels.empty()) kept_labels.push_back(m.row_labels[keep[r]]);
    }
    m.values = std::move(kept);
    m.row_labels = std::move(kept_labels);
    return m;
}

}  // namespace nmfrank
