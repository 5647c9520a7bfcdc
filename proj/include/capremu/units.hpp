#pragma once

// Canonical units inside the library: GW for power, Year for time and M€ for
// money. The helpers below convert from the market units used when quoting
// prices and costs.

namespace capremu::units {

/// Hours in a (non-leap) year.
inline constexpr double hours_per_year = 8760.0;

/// 1 €/MWh sustained over 1 GW for one year is 8.76 M€.
inline constexpr double eur_per_mwh_to_meur_per_gw_year = 8.76;

/// 1 €/kW = 1 M€/GW.
inline constexpr double eur_per_kw_to_meur_per_gw = 1.0;

/// One GW held for one year delivers 8.76 TWh.
inline constexpr double gw_year_to_twh = 8.76;

/// Quadratic build penalty quoted in €/(MWh·MW) to M€·Year/GW².
/// The quoted figure is an annualised per-hour cost, so it is scaled by the
/// energy factor and once more by the hours in a year.
inline constexpr double eur_per_mwh_mw_to_meur_year_per_gw2 =
    eur_per_mwh_to_meur_per_gw_year * hours_per_year;

constexpr double from_eur_per_mwh(double v) { return v * eur_per_mwh_to_meur_per_gw_year; }
constexpr double to_eur_per_mwh(double v) { return v / eur_per_mwh_to_meur_per_gw_year; }
constexpr double from_eur_per_kw(double v) { return v * eur_per_kw_to_meur_per_gw; }
constexpr double to_eur_per_kw(double v) { return v / eur_per_kw_to_meur_per_gw; }

/// M€ divided by TWh is €/MWh.
constexpr double meur_per_twh_to_eur_per_mwh(double v) { return v; }

}  // namespace capremu::units
