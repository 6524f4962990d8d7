// SPDX-License-Identifier: Apache-2.0
//
// cfura - joint message detection and channel estimation for cell-free uRA
// Copyright (C) 2026 cfura contributors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#ifndef CFURA_DOWNLINK_HPP
#define CFURA_DOWNLINK_HPP

#include <optional>
#include <vector>

#include "cfura/estimation.hpp"
#include "cfura/model.hpp"
#include "cfura/prior.hpp"
#include "cfura/rng.hpp"
#include "cfura/types.hpp"

namespace cfura
{
    struct ClusterMap
    {
        std::vector<std::vector<int>> clusters; // C_u, ascending RU indices
        std::vector<std::vector<int>> coverage; // S_b, ascending location indices

        bool serves(int u, int b) const;
    };

    // C_u holds the Q RUs with the largest g_{u,b}; ties go to the smaller index.
    ClusterMap form_clusters(const LsfcProfile &geometry, int Q);

    // Per-RU moments of one location at detection threshold nu_log:
    //   mean(b) = E[h_b eta_b^H | D],  var(b) = Var(h_b eta_b^H | D),
    //   z(b)    = (1 - P_md) E[|eta_b(h + z C^{1/2})|^2 | D]
    //           + (1/lambda - 1) P_fa E[|eta_b(z C^{1/2})|^2 | F].
    // eta acts on the full 1 x F row and b selects its b-th block of `antennas` entries.
    struct DlMoments
    {
        CVec mean;
        RVec var;
        RVec z;
        RVec z_detected;
        RVec z_false_alarm;
        RVec mean_std_error; // of |mean|
        RVec var_std_error;
        RVec z_std_error;
        double p_md = 0.0;
        double p_fa = 0.0;
        // sampled p_fa from the tilted draws, set only when they were used
        std::optional<double> p_fa_tilted;
        double p_fa_tilted_std_error = 0.0;
        ConditionalSampling sampling;
    };

    // When p_fa < kMinAcceptanceRate the false-alarm term of z comes from
    // idle rows drawn under an exponentially tilted law (tilt at the Chernoff
    // abscissa) with likelihood-ratio weights. Throws InsufficientSamples
    // when the detection stratum is accepted at a rate below kMinAcceptanceRate.
    DlMoments dl_conditional_moments(const PriorParams &prior, const EffectiveNoise &noise, double nu_log,
                                     int antennas, int mc_samples, const RngStream &stream);

    struct DlTables
    {
        CMat mean; // U x B
        RMat var;
        RMat z;
        // standard errors, empty when unknown
        RMat mean_std_error;
        RMat var_std_error;
        RMat z_std_error;
    };

    DlTables dl_tables(const std::vector<LocationPrior> &priors, const EffectiveNoise &noise, const RVec &nu_log,
                       int antennas, int mc_samples, const RngStream &stream, int threads = 1);

    // rho = (1/L) sum_u lambda_u alpha_u / sum_b sum_{u in S_b} lambda_u alpha_u Z_{u,b}
    double dl_power_normalization(const RMat &z, const std::vector<double> &lambda, const std::vector<double> &alpha,
                                  const std::vector<std::vector<int>> &coverage, int L);

    // Average transmit power of RU b: rho sum_{u in S_b} lambda_u N_u Z_{u,b}, N_u = alpha_u L.
    RVec dl_transmit_power(const RMat &z, const std::vector<double> &lambda, const std::vector<double> &alpha,
                           const std::vector<std::vector<int>> &coverage, int L, double rho_dl);

    // Variance term of the genie rate. The exact value of Var(|h_b|^2) summed
    // over the cluster is M sum g^2; as_printed uses M sum g.
    enum class GenieVariance
    {
        exact,
        as_printed
    };

    struct RateReport
    {
        RVec uatf;  // bits per symbol
        RVec genie; // bits per symbol
        // delta-method standard error of uatf from the table errors, rho_dl held fixed; empty without them
        RVec uatf_std_error;
        double rho_dl = 0.0;
        DlTables tables;
    };

    struct RateInputs
    {
        int L = 0;
        int antennas = 1;
        double sigma_w2 = 0.0;
        std::vector<double> lambda;
        std::vector<double> alpha;
        GenieVariance genie_variance = GenieVariance::exact;
    };

    RateReport uatf_rates(const LsfcProfile &geometry, const ClusterMap &clusters, const DlTables &tables,
                          double rho_dl, const RateInputs &in);

    // Closed-form genie rate of location u, in bits.
    double genie_rate(const LsfcProfile &geometry, const ClusterMap &clusters, int u, double rho_dl,
                      const RateInputs &in);

    struct RateCdfEntry
    {
        int location = 0;
        double rate = 0.0;
        double weight = 0.0;     // lambda_u N_u / sum lambda N
        double cumulative = 0.0;
    };

    // Staircase CDF over the active-user population, sorted by rate (ties by location).
    std::vector<RateCdfEntry> rate_cdf(const RVec &rates, const std::vector<double> &lambda,
                                       const std::vector<double> &alpha);

    // Smallest rate whose cumulative weight reaches 1/2.
    double cdf_median(const std::vector<RateCdfEntry> &cdf);
}

#endif
