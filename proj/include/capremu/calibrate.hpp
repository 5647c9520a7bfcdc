#pragma once

// Regression fits of the demand and spot-price models from daily,
// deseasonalised observations.
//
// Demand: L = log Xᴰ is Ornstein–Uhlenbeck, dL = μᴰ(mᴰ − L)dt + σᴰdW. Over a
// step h the exact transition is the AR(1) L' = mᴰ(1−φ) + φL + ε with
// φ = e^{−μᴰh} and Var ε = σᴰ²(1−φ²)/(2μᴰ), so regressing the returns
// ΔL on L identifies all three parameters.
//
// Spot price: log P = log β₀ − β₁(xᶜ − xᴰ), an ordinary regression of log
// price on the capacity margin.

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "capremu/csv.hpp"

namespace capremu {

class CalibrationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr std::size_t calibration_min_rows = 30;

struct Observation {
    std::string date;
    double capacity = 0.0;  // GW
    double demand = 0.0;    // GW
    double price = 0.0;     // €/MWh
};

/// y = intercept + slope·x by least squares, with classical standard errors.
struct LinearFit {
    double intercept = 0.0;
    double slope = 0.0;
    double se_intercept = 0.0;
    double se_slope = 0.0;
    double residual_sd = 0.0;  // √(RSS/(n−2))
    std::size_t n = 0;
};

inline LinearFit ols(const std::vector<double> &x, const std::vector<double> &y) {
    if (x.size() != y.size()) throw CalibrationError("regression inputs differ in length");
    const std::size_t n = x.size();
    if (n < 3) throw CalibrationError("regression needs at least 3 points");
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    // Rounding in the mean leaves a residue of order (ε·|x̄|)² per point even
    // for a constant regressor, so compare against that floor.
    const double floor = n * std::pow(64.0 * std::numeric_limits<double>::epsilon() * std::abs(mx), 2);
    if (!(sxx > floor)) throw CalibrationError("regressor is constant; slope is unidentifiable");
    LinearFit f;
    f.n = n;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    double rss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double r = y[i] - f.intercept - f.slope * x[i];
        rss += r * r;
    }
    f.residual_sd = std::sqrt(rss / static_cast<double>(n - 2));
    f.se_slope = f.residual_sd / std::sqrt(sxx);
    f.se_intercept = f.residual_sd * std::sqrt(1.0 / n + mx * mx / sxx);
    return f;
}

struct DemandFit {
    double mu_d = 0.0, m_d = 0.0, sigma_d = 0.0;
    double se_mu_d = 0.0, se_m_d = 0.0, se_sigma_d = 0.0;
};

/// Fit the log-demand OU process from levels sampled every `step` years.
inline DemandFit fit_demand(const std::vector<double> &demand, double step) {
    if (!(step > 0.0)) throw CalibrationError("sampling step must be > 0");
    std::vector<double> level, ret;
    for (std::size_t i = 0; i + 1 < demand.size(); ++i) {
        level.push_back(std::log(demand[i]));
        ret.push_back(std::log(demand[i + 1]) - std::log(demand[i]));
    }
    const LinearFit f = ols(level, ret);
    const double phi = 1.0 + f.slope;
    if (!(phi > 0.0 && phi < 1.0))
        throw CalibrationError("demand returns show no mean reversion (AR coefficient " +
                               std::to_string(phi) + ")");
    DemandFit d;
    d.mu_d = -std::log(phi) / step;
    d.m_d = -f.intercept / f.slope;
    d.sigma_d = f.residual_sd * std::sqrt(2.0 * d.mu_d / (1.0 - phi * phi));
    // Delta method. With the regressor centred at its mean L̄ the intercept
    // c = ΔL̄ is uncorrelated with the slope, and mᴰ = L̄ − c/slope.
    const double n = static_cast<double>(level.size());
    double rbar = 0.0;
    for (double r : ret) rbar += r;
    rbar /= n;
    const double se_c = f.residual_sd / std::sqrt(n);
    d.se_mu_d = f.se_slope / (phi * step);
    d.se_m_d = std::hypot(se_c / f.slope, rbar / (f.slope * f.slope) * f.se_slope);
    d.se_sigma_d = d.sigma_d / std::sqrt(2.0 * (n - 2.0));
    return d;
}

struct PriceFit {
    double beta0 = 0.0;  // €/MWh
    double beta1 = 0.0;  // GW⁻¹
    double se_log_beta0 = 0.0, se_beta1 = 0.0;
    double residual_sd = 0.0;
};

inline PriceFit fit_price(const std::vector<double> &margin, const std::vector<double> &price) {
    std::vector<double> lp;
    lp.reserve(price.size());
    for (double p : price) {
        if (!(p > 0.0)) throw CalibrationError("log-price regression needs positive prices");
        lp.push_back(std::log(p));
    }
    const LinearFit f = ols(margin, lp);
    PriceFit out;
    out.beta0 = std::exp(f.intercept);
    out.beta1 = -f.slope;
    out.se_log_beta0 = f.se_intercept;
    out.se_beta1 = f.se_slope;
    out.residual_sd = f.residual_sd;
    return out;
}

/// Read `date,capacity[GW],demand[GW],price[EUR/MWh]` rows (header required).
inline std::vector<Observation> read_observations(std::istream &in, const std::string &origin) {
    std::string line;
    if (!std::getline(in, line)) throw CalibrationError(origin + ": empty input");
    std::vector<Observation> out;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto c = split_csv_line(line);
        const std::string where = origin + ":" + std::to_string(lineno);
        if (c.size() != 4) throw CalibrationError(where + ": expected 4 cells");
        Observation o;
        o.date = c[0];
        try {
            o.capacity = parse_double(c[1], where);
            o.demand = parse_double(c[2], where);
            o.price = parse_double(c[3], where);
        } catch (const CsvError &e) {
            throw CalibrationError(e.what());
        }
        if (!std::isfinite(o.capacity) || !std::isfinite(o.demand) || !std::isfinite(o.price))
            throw CalibrationError(where + ": non-finite value");
        if (!(o.capacity > 0.0) || !(o.demand > 0.0))
            throw CalibrationError(where + ": capacity and demand must be > 0");
        out.push_back(std::move(o));
    }
    return out;
}

struct CalibrationResult {
    DemandFit demand;
    PriceFit price;
    std::size_t rows = 0;
};

inline CalibrationResult calibrate(const std::vector<Observation> &obs, double step = 1.0 / 365.0) {
    if (obs.size() < calibration_min_rows)
        throw CalibrationError("calibration needs at least " +
                               std::to_string(calibration_min_rows) + " rows, got " +
                               std::to_string(obs.size()));
    std::vector<double> dem, margin, price;
    for (const auto &o : obs) {
        dem.push_back(o.demand);
        margin.push_back(o.capacity - o.demand);
        price.push_back(o.price);
    }
    CalibrationResult r;
    r.rows = obs.size();
    r.demand = fit_demand(dem, step);
    r.price = fit_price(margin, price);
    return r;
}

/// Config fragment in the configuration-file grammar. σᶜ is not fitted; it
/// is written only when supplied.
inline std::string render_calibration(const CalibrationResult &r, const double *sigma_c = nullptr) {
    std::ostringstream out;
    out.precision(10);
    out << "# fitted from " << r.rows << " observations; standard errors in comments\n";
    out << "mu_d = " << r.demand.mu_d << "  # Year^-1, se " << r.demand.se_mu_d << "\n";
    out << "m_d = " << r.demand.m_d << "  # log GW, se " << r.demand.se_m_d << "\n";
    out << "sigma_d = " << r.demand.sigma_d << "  # Year^-1/2, se " << r.demand.se_sigma_d << "\n";
    out << "beta0 = " << r.price.beta0 << "  # EUR/MWh, se(log) " << r.price.se_log_beta0 << "\n";
    out << "beta1 = " << r.price.beta1 << "  # GW^-1, se " << r.price.se_beta1 << "\n";
    if (sigma_c) out << "sigma_c = " << *sigma_c << "  # Year^-1/2, supplied\n";
    return out.str();
}

}  // namespace capremu
