#include "clustex/synthetic.hpp"

#include "clustex/rng.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace clustex {

SyntheticSpec default_synthetic_spec() {
    SyntheticSpec spec;
    spec.cluster_sizes = {1340, 660};
    spec.cluster_means.resize(2, 6);
    spec.cluster_means << 4.0, 4.0, 4.5, 4.0, 4.0, 4.0,
                          3.9, 3.9, 2.5, 3.9, 3.9, 3.9;
    spec.noise_scale = 0.12;
    spec.dominant_feature = 2;
    spec.seed = 1;
    return spec;
}

SyntheticData generate_synthetic(const SyntheticSpec& spec) {
    const auto clusters = static_cast<Index>(spec.cluster_sizes.size());
    if (clusters < 1) throw std::invalid_argument("generate_synthetic: no clusters");
    if (spec.cluster_means.rows() != clusters)
        throw std::invalid_argument("generate_synthetic: means do not match cluster count");
    const Index p = spec.cluster_means.cols();
    if (spec.dominant_feature < 0 || static_cast<Index>(spec.dominant_feature) >= p)
        throw std::invalid_argument("generate_synthetic: dominant feature out of range");
    if (spec.noise_scale <= 0.0)
        throw std::invalid_argument("generate_synthetic: noise scale must be positive");
    if (spec.cluster_means.minCoeff() < 1.0 || spec.cluster_means.maxCoeff() > 5.0)
        throw std::invalid_argument("generate_synthetic: cluster means must lie in [1,5]");
    for (Index a = 0; a < clusters; ++a)
        for (Index b = a + 1; b < clusters; ++b) {
            const double dominant =
                std::abs(spec.cluster_means(a, spec.dominant_feature) -
                         spec.cluster_means(b, spec.dominant_feature));
            for (Index f = 0; f < p; ++f) {
                if (f == spec.dominant_feature) continue;
                if (std::abs(spec.cluster_means(a, f) - spec.cluster_means(b, f)) >= dominant)
                    throw std::invalid_argument(
                        "generate_synthetic: dominant feature must separate clusters more "
                        "than every other feature");
            }
        }

    Index total = 0;
    for (Index size : spec.cluster_sizes) {
        if (size < 1) throw std::invalid_argument("generate_synthetic: empty cluster");
        total += size;
    }

    SyntheticData data;
    data.features.values.resize(total, p);
    data.truth.reserve(static_cast<std::size_t>(total));
    if (p == 6) {
        data.features.feature_names = {"OSC1", "OSC2", "OSC3", "GSC1", "GSC2", "GSC3"};
    } else {
        for (Index f = 0; f < p; ++f)
            data.features.feature_names.push_back("F" + std::to_string(f + 1));
    }

    int id_width = 1;
    for (Index v = total; v >= 10; v /= 10) ++id_width;

    Rng rng(spec.seed);
    Index row = 0;
    for (Index c = 0; c < clusters; ++c) {
        for (Index i = 0; i < spec.cluster_sizes[static_cast<std::size_t>(c)]; ++i, ++row) {
            for (Index f = 0; f < p; ++f) {
                const double noise = rng.next_double(-spec.noise_scale, spec.noise_scale);
                data.features.values(row, f) =
                    std::clamp(spec.cluster_means(c, f) + noise, 1.0, 5.0);
            }
            std::string id = std::to_string(row + 1);
            id.insert(0, static_cast<std::size_t>(id_width) - id.size(), '0');
            data.features.respondent_ids.push_back("s" + id);
            data.truth.push_back(static_cast<int>(c) + 1);
        }
    }
    return data;
}

}  // namespace clustex
