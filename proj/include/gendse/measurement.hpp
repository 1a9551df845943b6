#ifndef GENDSE_MEASUREMENT_HPP
#define GENDSE_MEASUREMENT_HPP

#include <array>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "gendse/dynamics.hpp"
#include "gendse/io.hpp"
#include "gendse/types.hpp"

namespace gendse {

struct MeasurementSample {
    double t = 0.0;
    MeasVector z = MeasVector::Zero();  // delta_z, omega_z, Pe_z
    double U_meas = 1.0;
    double phi_meas = 0.0;
    std::array<bool, kMeasDim> valid{true, true, true};

    TerminalPhasor terminal() const { return {U_meas, phi_meas}; }
};

using MeasurementStream = std::vector<MeasurementSample>;

// Simulation sigmas drive the noise generator; the *_R sigmas build the
// covariance the filters assume.
struct NoiseModel {
    double sigma_delta = deg_to_rad(2.0);
    double sigma_omega = 0.001;
    double sigma_U = 0.001;               // fraction of U
    double sigma_phi = deg_to_rad(0.1);
    double sigma_delta_R = deg_to_rad(2.0);
    double sigma_omega_R = 0.001;
    double sigma_U_R = 0.002;             // fraction of U
    double sigma_phi_R = deg_to_rad(0.2);
    std::uint64_t seed = 1;

    void validate() const {
        for (double s : {sigma_delta, sigma_omega, sigma_U, sigma_phi, sigma_delta_R, sigma_omega_R, sigma_U_R,
                         sigma_phi_R})
            require(std::isfinite(s) && s >= 0.0, "NoiseModel: sigmas must be finite and >= 0");
    }
};

inline MeasVector measure(const GeneratorState& s, TerminalPhasor term, const GeneratorParams& p) {
    return MeasVector(s.delta, s.omega, electrical_power(s, term, p));
}

struct PowerPartials {
    double dU = 0.0;
    double dphi = 0.0;
    double ddelta = 0.0;
    double dEqp = 0.0;
    double dEdp = 0.0;
};

inline PowerPartials power_partials(const GeneratorState& s, TerminalPhasor term, const GeneratorParams& p) {
    const double th = s.delta - term.phi;
    const double U = term.U;
    const double k = 1.0 / p.X_qp - 1.0 / p.X_dp;
    const double sn = std::sin(th);
    const double cs = std::cos(th);
    PowerPartials d;
    d.dU = U * std::sin(2.0 * th) * k + sn * s.Eqp / p.X_dp + cs * s.Edp / p.X_qp;
    d.ddelta = U * U * std::cos(2.0 * th) * k + U * cs * s.Eqp / p.X_dp - U * sn * s.Edp / p.X_qp;
    d.dphi = -d.ddelta;
    d.dEqp = U * sn / p.X_dp;
    d.dEdp = U * cs / p.X_qp;
    return d;
}

// Diagonal measurement covariance; the power channel variance is propagated
// from the terminal magnitude and angle uncertainty.
inline MeasMatrix noise_covariance(TerminalPhasor term, const GeneratorState& s, const GeneratorParams& p,
                                   const NoiseModel& m) {
    const PowerPartials d = power_partials(s, term, p);
    const double sU = m.sigma_U_R * term.U;
    MeasMatrix R = MeasMatrix::Zero();
    R(kDeltaZ, kDeltaZ) = m.sigma_delta_R * m.sigma_delta_R;
    R(kOmegaZ, kOmegaZ) = m.sigma_omega_R * m.sigma_omega_R;
    R(kPeZ, kPeZ) = d.dU * d.dU * sU * sU + d.dphi * d.dphi * m.sigma_phi_R * m.sigma_phi_R;
    return R;
}

// Sub-seed derivation (splitmix64) so independent consumers of a master seed
// never share a random sequence.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream_id) {
    std::uint64_t z = master + 0x9E3779B97F4A7C15ULL * (stream_id + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

inline std::size_t sampling_stride(double rate_hz, double dt) {
    require(rate_hz > 0.0 && dt > 0.0, "sampling: rate and dt must be > 0");
    const double ratio = 1.0 / (rate_hz * dt);
    const long stride = std::lround(ratio);
    if (stride < 1 || std::abs(ratio - static_cast<double>(stride)) > 1e-9)
        throw ValidationError("sampling: rate " + io::fmt(rate_hz) + " Hz is incompatible with dt " + io::fmt(dt));
    return static_cast<std::size_t>(stride);
}

// Noisy PMU frames. The power channel sees its own terminal-phasor noise draw,
// independent of the reported U_meas / phi_meas.
inline MeasurementStream sample_stream(const TruthTrajectory& truth, const NoiseModel& m, double rate_hz,
                                       const GeneratorParams& p) {
    m.validate();
    const std::size_t stride = sampling_stride(rate_hz, truth.dt);
    std::mt19937_64 rng(m.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    MeasurementStream out;
    out.reserve(truth.size() / stride + 1);
    for (std::size_t k = 0; k < truth.size(); k += stride) {
        const GeneratorState& x = truth.states[k];
        const TerminalPhasor term = truth.inputs[k].terminal();
        const double n_delta = gauss(rng);
        const double n_omega = gauss(rng);
        const double n_U = gauss(rng);
        const double n_phi = gauss(rng);
        const double n_U_pe = gauss(rng);
        const double n_phi_pe = gauss(rng);

        MeasurementSample s;
        s.t = truth.t[k];
        s.U_meas = term.U * (1.0 + m.sigma_U * n_U);
        s.phi_meas = term.phi + m.sigma_phi * n_phi;
        const TerminalPhasor pe_term{term.U * (1.0 + m.sigma_U * n_U_pe), term.phi + m.sigma_phi * n_phi_pe};
        s.z(kDeltaZ) = x.delta + m.sigma_delta * n_delta;
        s.z(kOmegaZ) = x.omega + m.sigma_omega * n_omega;
        s.z(kPeZ) = electrical_power(x, pe_term, p);
        out.push_back(s);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Stream files: t, delta_z, omega_z, Pe_z, U_meas, phi_meas[, valid_delta, valid_omega, valid_Pe]

inline void write_stream(std::ostream& out, const MeasurementStream& s, bool with_flags) {
    out << "t,delta_z,omega_z,Pe_z,U_meas,phi_meas";
    if (with_flags) out << ",valid_delta,valid_omega,valid_Pe";
    out << '\n';
    for (const auto& m : s) {
        out << io::fmt(m.t) << ',' << io::fmt(m.z(0)) << ',' << io::fmt(m.z(1)) << ',' << io::fmt(m.z(2)) << ','
            << io::fmt(m.U_meas) << ',' << io::fmt(m.phi_meas);
        if (with_flags) out << ',' << int(m.valid[0]) << ',' << int(m.valid[1]) << ',' << int(m.valid[2]);
        out << '\n';
    }
}

inline MeasurementStream parse_stream(const io::Table& tab, const std::string& source = "stream") {
    const char* required[] = {"t", "delta_z", "omega_z", "Pe_z", "U_meas", "phi_meas"};
    std::size_t col[6];
    for (int i = 0; i < 6; ++i) {
        auto c = tab.column(required[i]);
        if (!c) throw ValidationError(source + ": missing column " + required[i]);
        col[i] = *c;
    }
    const auto v0 = tab.column("valid_delta");
    const auto v1 = tab.column("valid_omega");
    const auto v2 = tab.column("valid_Pe");
    if (tab.rows.empty()) throw ValidationError(source + ": no data rows");
    MeasurementStream out;
    for (std::size_t i = 0; i < tab.rows.size(); ++i) {
        const auto& r = tab.rows[i];
        if (i >= 1 && !(r[col[0]] > out.back().t))
            throw ValidationError(source + ": row " + std::to_string(i + 2) + " timestamp not increasing");
        if (i >= 2 && std::abs((r[col[0]] - out.back().t) - (out[1].t - out[0].t)) > io::kStepJitterTol)
            throw ValidationError(source + ": row " + std::to_string(i + 2) + " breaks the uniform step");
        MeasurementSample s;
        s.t = r[col[0]];
        s.z = MeasVector(r[col[1]], r[col[2]], r[col[3]]);
        s.U_meas = r[col[4]];
        s.phi_meas = r[col[5]];
        if (v0) s.valid[0] = r[*v0] != 0.0;
        if (v1) s.valid[1] = r[*v1] != 0.0;
        if (v2) s.valid[2] = r[*v2] != 0.0;
        out.push_back(s);
    }
    return out;
}

inline MeasurementStream read_stream_file(const std::string& path) {
    return parse_stream(io::read_table_file(path), path);
}

}  // namespace gendse

#endif  // GENDSE_MEASUREMENT_HPP
