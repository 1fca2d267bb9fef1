#pragma once

#include "opsim/error.hpp"
#include "opsim/time.hpp"

#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace opsim {

// Static grid data plus attached time series. Power quantities are stored
// per-unit on the system base after load; costs stay in natural units
// ($/MWh, $/h, $). The model is immutable once loaded; only the forecast
// read cache mutates afterwards.

enum class BusType { Slack, PQ, PV };

struct Bus {
    std::string name;
    double base_voltage_kv = 0.0;
    BusType bus_type = BusType::PQ;
};

struct Line {
    std::string name;
    std::string from_bus;
    std::string to_bus;
    double reactance = 0.0; // per-unit
    double rating = 0.0;    // per-unit on system base
};

struct PwlPoint {
    double power = 0.0; // per-unit
    double cost = 0.0;  // $/h at that output
};

struct ThermalInitial {
    bool on = false;
    double power = 0.0; // per-unit
    int duration_h = 1; // hours already on (or off)
};

struct ThermalGen {
    std::string name;
    std::string bus;
    double p_min = 0.0;
    double p_max = 0.0;
    double ramp_up = 0.0; // per-unit per hour
    double ramp_dn = 0.0;
    int min_up_h = 0;
    int min_dn_h = 0;
    double variable_cost = 0.0;   // $/MWh, ignored when pwl is present
    std::vector<PwlPoint> pwl;    // convex input-output curve
    double no_load_cost = 0.0;    // $/h
    double startup_cost = 0.0;    // $
    std::optional<ThermalInitial> initial;
};

struct RenewableGen {
    std::string name;
    std::string bus;
    double rating = 0.0;          // per-unit
    double curtailment_cost = 0.0; // $/MWh
};

struct Load {
    std::string name;
    std::string bus;
    double peak = 0.0; // per-unit
};

struct Storage {
    std::string name;
    std::string bus;
    double energy_cap = 0.0; // per-unit-hour
    double p_charge_max = 0.0;
    double p_discharge_max = 0.0;
    double eff_charge = 1.0;
    double eff_discharge = 1.0;
    std::optional<double> initial_soc; // per-unit-hour
};

struct ReserveProduct {
    std::string name;
    std::string direction = "up";
    std::vector<std::string> contributing_devices;
    std::string requirement_series_name;
};

// Issue-time-keyed look-ahead windows for one (component, label) pair.
struct Forecast {
    std::string component;
    std::string label;
    TimeSpan resolution{};
    TimeSpan issue_interval{};
    int horizon_steps = 0;
    TimePoint first_issue{};
    std::vector<std::vector<double>> windows; // one per issue, horizon_steps values

    int n_issues() const { return static_cast<int>(windows.size()); }
    TimePoint issue_at(int k) const { return first_issue + issue_interval * k; }
    // -1 when `t` is not exactly on the issue grid.
    int issue_index(TimePoint t) const;
};

// Single-timeline actuals.
struct RealizationSeries {
    std::string component;
    std::string label;
    TimeSpan resolution{};
    TimePoint start{};
    std::vector<double> values;

    TimePoint end() const { return start + resolution * static_cast<std::int64_t>(values.size()); }
};

struct CacheStats {
    std::uint64_t hits = 0;
    std::uint64_t misses = 0;
};

class SystemModel {
public:
    // Loads and fully validates a JSON descriptor plus its CSV time series.
    // Deterministic: identical file bytes produce a structurally identical
    // model.
    static SystemModel load(const std::string& descriptor_path);

    double base_power() const { return base_power_; }
    double to_pu(double mw) const { return mw / base_power_; }
    double to_mw(double pu) const { return pu * base_power_; }

    const std::vector<Bus>& buses() const { return buses_; }
    const std::vector<Line>& lines() const { return lines_; }
    const std::vector<ThermalGen>& thermal_gens() const { return thermal_; }
    const std::vector<RenewableGen>& renewable_gens() const { return renewables_; }
    const std::vector<Load>& loads() const { return loads_; }
    const std::vector<Storage>& storages() const { return storages_; }
    const std::vector<ReserveProduct>& reserves() const { return reserves_; }

    const Bus& slack_bus() const;
    int bus_index(const std::string& name) const; // -1 when absent
    bool component_exists(const std::string& name) const;
    const ThermalGen* find_thermal(const std::string& name) const;
    const Storage* find_storage(const std::string& name) const;

    // --- time series ---------------------------------------------------
    // First horizon_steps values of the window issued at issue_time.
    // Repeated identical calls are served from an in-memory cache.
    // `resolution` disambiguates when several forecasts exist for the same
    // (component, label); zero means "unique match required".
    std::vector<double> get_forecast_window(const std::string& component, const std::string& label,
                                            TimePoint issue_time, int horizon_steps,
                                            TimeSpan resolution = TimeSpan{0}) const;
    double get_realization(const std::string& component, const std::string& label,
                           TimePoint at) const;

    const std::vector<Forecast>& forecasts() const { return forecasts_; }
    const std::vector<RealizationSeries>& realizations() const { return realizations_; }
    const Forecast* find_forecast(const std::string& component, const std::string& label,
                                  TimeSpan resolution) const;
    const RealizationSeries* find_realization(const std::string& component,
                                              const std::string& label) const;

    CacheStats forecast_cache_stats() const { return cache_stats_; }

private:
    friend class SystemModelBuilder;

    double base_power_ = 100.0;
    std::vector<Bus> buses_;
    std::vector<Line> lines_;
    std::vector<ThermalGen> thermal_;
    std::vector<RenewableGen> renewables_;
    std::vector<Load> loads_;
    std::vector<Storage> storages_;
    std::vector<ReserveProduct> reserves_;
    std::vector<Forecast> forecasts_;
    std::vector<RealizationSeries> realizations_;
    std::map<std::string, int> bus_index_;
    std::map<std::string, std::string> component_kind_; // name -> kind tag

    mutable std::unordered_map<std::string, std::vector<double>> window_cache_;
    mutable CacheStats cache_stats_;
};

} // namespace opsim
