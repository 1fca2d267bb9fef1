#include "opsim/system_model.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace opsim {

namespace fs = std::filesystem;
using nlohmann::json;

int Forecast::issue_index(TimePoint t) const {
    const std::int64_t delta = (t - first_issue).seconds;
    if (issue_interval.seconds <= 0) return -1;
    if (delta < 0 || delta % issue_interval.seconds != 0) return -1;
    const std::int64_t k = delta / issue_interval.seconds;
    if (k >= static_cast<std::int64_t>(windows.size())) return -1;
    return static_cast<int>(k);
}

namespace {

[[noreturn]] void schema_error(const std::string& ctx, const std::string& what) {
    throw ValidationError("schema violation in " + ctx + ": " + what);
}

const json& req(const json& j, const char* field, const std::string& ctx) {
    auto it = j.find(field);
    if (it == j.end()) schema_error(ctx, "missing field '" + std::string(field) + "'");
    return *it;
}

double req_num(const json& j, const char* field, const std::string& ctx) {
    const json& v = req(j, field, ctx);
    if (!v.is_number()) schema_error(ctx, "field '" + std::string(field) + "' must be a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) schema_error(ctx, "field '" + std::string(field) + "' is not finite");
    return d;
}

std::string req_str(const json& j, const char* field, const std::string& ctx) {
    const json& v = req(j, field, ctx);
    if (!v.is_string()) schema_error(ctx, "field '" + std::string(field) + "' must be a string");
    return v.get<std::string>();
}

int req_int(const json& j, const char* field, const std::string& ctx) {
    const json& v = req(j, field, ctx);
    if (!v.is_number_integer()) schema_error(ctx, "field '" + std::string(field) + "' must be an integer");
    return v.get<int>();
}

// --- tiny CSV reader --------------------------------------------------------

struct Csv {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    int column(const std::string& name) const {
        for (size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return static_cast<int>(i);
        return -1;
    }
};

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    size_t b = s.find_last_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    return s.substr(a, b - a + 1);
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            out.push_back(trim(cur));
            cur.clear();
        } else {
            cur.push_back(ch);
        }
    }
    out.push_back(trim(cur));
    return out;
}

Csv read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("missing file: cannot open time series CSV '" + path + "'");
    Csv csv;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        auto fields = split_csv_line(line);
        if (first) {
            csv.header = std::move(fields);
            first = false;
        } else {
            if (fields.size() != csv.header.size())
                throw ValidationError("malformed CSV '" + path + "': row with " +
                                      std::to_string(fields.size()) + " fields, header has " +
                                      std::to_string(csv.header.size()));
            csv.rows.push_back(std::move(fields));
        }
    }
    if (first) throw ValidationError("malformed CSV '" + path + "': no header row");
    return csv;
}

double parse_value(const std::string& text, const std::string& ctx) {
    try {
        size_t used = 0;
        const double v = std::stod(text, &used);
        if (used != text.size()) throw std::invalid_argument("trailing characters");
        if (!std::isfinite(v)) throw ValidationError(ctx + ": value '" + text + "' is not finite");
        return v;
    } catch (const ValidationError&) {
        throw;
    } catch (const std::exception&) {
        throw ValidationError(ctx + ": cannot parse value '" + text + "'");
    }
}

} // namespace

const Bus& SystemModel::slack_bus() const {
    for (const auto& b : buses_)
        if (b.bus_type == BusType::Slack) return b;
    throw ContractError("system has no slack bus");
}

int SystemModel::bus_index(const std::string& name) const {
    auto it = bus_index_.find(name);
    return it == bus_index_.end() ? -1 : it->second;
}

bool SystemModel::component_exists(const std::string& name) const {
    return component_kind_.contains(name);
}

const ThermalGen* SystemModel::find_thermal(const std::string& name) const {
    for (const auto& g : thermal_)
        if (g.name == name) return &g;
    return nullptr;
}

const Storage* SystemModel::find_storage(const std::string& name) const {
    for (const auto& s : storages_)
        if (s.name == name) return &s;
    return nullptr;
}

const Forecast* SystemModel::find_forecast(const std::string& component, const std::string& label,
                                           TimeSpan resolution) const {
    const Forecast* found = nullptr;
    for (const auto& f : forecasts_) {
        if (f.component != component || f.label != label) continue;
        if (resolution.seconds != 0 && f.resolution != resolution) continue;
        if (found != nullptr) return nullptr; // ambiguous
        found = &f;
    }
    return found;
}

const RealizationSeries* SystemModel::find_realization(const std::string& component,
                                                       const std::string& label) const {
    for (const auto& r : realizations_)
        if (r.component == component && r.label == label) return &r;
    return nullptr;
}

std::vector<double> SystemModel::get_forecast_window(const std::string& component,
                                                     const std::string& label, TimePoint issue_time,
                                                     int horizon_steps, TimeSpan resolution) const {
    std::vector<const Forecast*> matches;
    for (const auto& f : forecasts_) {
        if (f.component == component && f.label == label &&
            (resolution.seconds == 0 || f.resolution == resolution))
            matches.push_back(&f);
    }
    if (matches.empty())
        throw ValidationError("no forecast registered for (" + component + ", " + label + ")");

    // Among candidates covering this issue time with a sufficient horizon,
    // the most specific window wins: smallest stored horizon, then densest
    // issue grid. Exact ties are a registration error.
    const Forecast* chosen = nullptr;
    bool issue_found = false;
    for (const Forecast* f : matches) {
        const int k = f->issue_index(issue_time);
        if (k < 0) continue;
        issue_found = true;
        if (horizon_steps > f->horizon_steps) continue;
        if (chosen == nullptr || f->horizon_steps < chosen->horizon_steps ||
            (f->horizon_steps == chosen->horizon_steps &&
             f->issue_interval.seconds < chosen->issue_interval.seconds)) {
            chosen = f;
        } else if (f->horizon_steps == chosen->horizon_steps &&
                   f->issue_interval == chosen->issue_interval) {
            throw ValidationError("ambiguous forecast for (" + component + ", " + label + ") at " +
                                  format_iso8601(issue_time) + "; pass a resolution to disambiguate");
        }
    }
    if (chosen == nullptr) {
        if (issue_found)
            throw ValidationError("horizon overrun: requested " + std::to_string(horizon_steps) +
                                  " steps of forecast (" + component + ", " + label + ")");
        throw ValidationError("issue time not found: " + format_iso8601(issue_time) +
                              " for forecast (" + component + ", " + label + ")");
    }

    std::string cache_key = component;
    cache_key += '\x1f';
    cache_key += label;
    cache_key += '\x1f';
    cache_key += std::to_string(chosen->resolution.seconds);
    cache_key += '\x1f';
    cache_key += std::to_string(issue_time.epoch_s);
    cache_key += '\x1f';
    cache_key += std::to_string(horizon_steps);
    if (auto it = window_cache_.find(cache_key); it != window_cache_.end()) {
        ++cache_stats_.hits;
        return it->second;
    }
    ++cache_stats_.misses;
    const int k = chosen->issue_index(issue_time);
    const auto& window = chosen->windows[static_cast<size_t>(k)];
    std::vector<double> out(window.begin(), window.begin() + horizon_steps);
    window_cache_.emplace(std::move(cache_key), out);
    return out;
}

double SystemModel::get_realization(const std::string& component, const std::string& label,
                                    TimePoint at) const {
    const RealizationSeries* s = find_realization(component, label);
    if (s == nullptr)
        throw ValidationError("no realization series registered for (" + component + ", " + label +
                              ")");
    const std::int64_t delta = (at - s->start).seconds;
    if (delta % s->resolution.seconds != 0)
        throw ValidationError("off-grid timestamp " + format_iso8601(at) + " for series (" +
                              component + ", " + label + ") with resolution " +
                              format_duration(s->resolution));
    const std::int64_t k = delta / s->resolution.seconds;
    if (delta < 0 || k >= static_cast<std::int64_t>(s->values.size()))
        throw ValidationError("timestamp out of range: " + format_iso8601(at) + " for series (" +
                              component + ", " + label + ")");
    return s->values[static_cast<size_t>(k)];
}

SystemModel SystemModel::load(const std::string& descriptor_path) {
    if (!fs::exists(descriptor_path))
        throw IoError("missing file: system descriptor '" + descriptor_path + "'");
    std::ifstream in(descriptor_path);
    if (!in) throw IoError("missing file: cannot open '" + descriptor_path + "'");
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& e) {
        throw ValidationError("descriptor '" + descriptor_path + "' is not valid JSON: " + e.what());
    }
    const fs::path base_dir = fs::path(descriptor_path).parent_path();

    SystemModel sys;
    sys.base_power_ = req_num(doc, "base_power", "descriptor");
    if (sys.base_power_ <= 0.0) schema_error("descriptor", "base_power must be > 0");
    const double base = sys.base_power_;

    auto claim_name = [&sys](const std::string& name, const std::string& kind) {
        if (name.empty()) schema_error(kind, "empty component name");
        auto [it, inserted] = sys.component_kind_.emplace(name, kind);
        (void)it;
        if (!inserted) throw ValidationError("duplicate name '" + name + "'");
    };

    int slack_count = 0;
    for (const auto& jb : req(doc, "buses", "descriptor")) {
        Bus b;
        b.name = req_str(jb, "name", "bus");
        b.base_voltage_kv = jb.value("base_voltage", 0.0);
        const std::string type = jb.value("bus_type", "pq");
        if (type == "slack") b.bus_type = BusType::Slack;
        else if (type == "pq") b.bus_type = BusType::PQ;
        else if (type == "pv") b.bus_type = BusType::PV;
        else schema_error("bus '" + b.name + "'", "unknown bus_type '" + type + "'");
        if (b.bus_type == BusType::Slack) ++slack_count;
        claim_name(b.name, "bus");
        sys.bus_index_.emplace(b.name, static_cast<int>(sys.buses_.size()));
        sys.buses_.push_back(std::move(b));
    }
    if (slack_count != 1)
        throw ValidationError("invariant violation: system must have exactly one slack bus, found " +
                              std::to_string(slack_count));

    auto check_bus_ref = [&sys](const std::string& bus, const std::string& owner) {
        if (sys.bus_index_.find(bus) == sys.bus_index_.end())
            throw ValidationError("dangling component reference: '" + owner +
                                  "' references unknown bus '" + bus + "'");
    };

    for (const auto& jl : doc.value("lines", json::array())) {
        Line l;
        l.name = req_str(jl, "name", "line");
        l.from_bus = req_str(jl, "from_bus", "line '" + l.name + "'");
        l.to_bus = req_str(jl, "to_bus", "line '" + l.name + "'");
        if (l.from_bus == l.to_bus)
            throw ValidationError("invariant violation: self-loop line '" + l.name + "'");
        check_bus_ref(l.from_bus, l.name);
        check_bus_ref(l.to_bus, l.name);
        l.reactance = req_num(jl, "reactance", "line '" + l.name + "'");
        if (l.reactance <= 0.0)
            throw ValidationError("invariant violation: line '" + l.name + "' reactance must be > 0");
        const double rating_mw = req_num(jl, "rating", "line '" + l.name + "'");
        if (rating_mw <= 0.0)
            throw ValidationError("invariant violation: line '" + l.name + "' rating must be > 0");
        l.rating = rating_mw / base;
        claim_name(l.name, "line");
        sys.lines_.push_back(std::move(l));
    }

    for (const auto& jg : doc.value("thermal_gens", json::array())) {
        ThermalGen g;
        g.name = req_str(jg, "name", "thermal_gen");
        const std::string ctx = "thermal_gen '" + g.name + "'";
        g.bus = req_str(jg, "bus", ctx);
        check_bus_ref(g.bus, g.name);
        const double p_min_mw = req_num(jg, "p_min", ctx);
        const double p_max_mw = req_num(jg, "p_max", ctx);
        if (!(0.0 <= p_min_mw && p_min_mw <= p_max_mw))
            throw ValidationError("invariant violation: " + ctx + " requires 0 <= p_min <= p_max");
        g.p_min = p_min_mw / base;
        g.p_max = p_max_mw / base;
        const double ru = req_num(jg, "ramp_up", ctx);
        const double rd = req_num(jg, "ramp_dn", ctx);
        if (ru <= 0.0 || rd <= 0.0)
            throw ValidationError("invariant violation: " + ctx + " ramps must be > 0");
        g.ramp_up = ru / base;
        g.ramp_dn = rd / base;
        g.min_up_h = req_int(jg, "min_up", ctx);
        g.min_dn_h = req_int(jg, "min_dn", ctx);
        if (g.min_up_h < 0 || g.min_dn_h < 0)
            throw ValidationError("invariant violation: " + ctx + " min_up/min_dn must be >= 0");
        if (jg.contains("pwl_cost")) {
            for (const auto& jp : jg.at("pwl_cost")) {
                if (!jp.is_array() || jp.size() != 2)
                    schema_error(ctx, "pwl_cost entries must be [MW, $/h] pairs");
                g.pwl.push_back({jp[0].get<double>() / base, jp[1].get<double>()});
            }
            if (g.pwl.size() < 2) schema_error(ctx, "pwl_cost needs at least two points");
            double prev_slope = -1e300;
            for (size_t i = 1; i < g.pwl.size(); ++i) {
                const double dmw = g.pwl[i].power - g.pwl[i - 1].power;
                if (dmw <= 0.0)
                    throw ValidationError("invariant violation: " + ctx +
                                          " pwl_cost breakpoints must be strictly increasing in MW");
                const double slope = (g.pwl[i].cost - g.pwl[i - 1].cost) / dmw;
                if (slope < prev_slope - 1e-9)
                    throw ValidationError("invariant violation: " + ctx +
                                          " pwl_cost slopes must be nondecreasing (convex)");
                prev_slope = slope;
            }
        } else {
            g.variable_cost = req_num(jg, "variable_cost", ctx);
            if (g.variable_cost < 0.0)
                throw ValidationError("invariant violation: " + ctx + " variable_cost must be >= 0");
        }
        g.no_load_cost = jg.value("no_load_cost", 0.0);
        g.startup_cost = jg.value("startup_cost", 0.0);
        if (g.no_load_cost < 0.0 || g.startup_cost < 0.0)
            throw ValidationError("invariant violation: " + ctx + " costs must be >= 0");
        if (jg.contains("initial")) {
            const auto& ji = jg.at("initial");
            ThermalInitial init;
            init.on = req(ji, "on", ctx).get<bool>();
            const double p0_mw = req_num(ji, "power", ctx);
            init.duration_h = req_int(ji, "duration", ctx);
            if (init.duration_h < 1)
                throw ValidationError("invariant violation: " + ctx + " initial duration must be >= 1");
            if (init.on && !(p_min_mw <= p0_mw && p0_mw <= p_max_mw))
                throw ValidationError("invariant violation: " + ctx +
                                      " initial power must lie in [p_min, p_max] when on");
            if (!init.on && p0_mw != 0.0)
                throw ValidationError("invariant violation: " + ctx + " initial power must be 0 when off");
            init.power = p0_mw / base;
            g.initial = init;
        }
        claim_name(g.name, "thermal_gen");
        sys.thermal_.push_back(std::move(g));
    }

    for (const auto& jr : doc.value("renewable_gens", json::array())) {
        RenewableGen r;
        r.name = req_str(jr, "name", "renewable_gen");
        r.bus = req_str(jr, "bus", "renewable_gen '" + r.name + "'");
        check_bus_ref(r.bus, r.name);
        const double rating_mw = req_num(jr, "rating", "renewable_gen '" + r.name + "'");
        if (rating_mw <= 0.0)
            throw ValidationError("invariant violation: renewable '" + r.name + "' rating must be > 0");
        r.rating = rating_mw / base;
        r.curtailment_cost = jr.value("curtailment_cost", 0.0);
        if (r.curtailment_cost < 0.0)
            throw ValidationError("invariant violation: renewable '" + r.name +
                                  "' curtailment_cost must be >= 0");
        claim_name(r.name, "renewable_gen");
        sys.renewables_.push_back(std::move(r));
    }

    for (const auto& jl : doc.value("loads", json::array())) {
        Load l;
        l.name = req_str(jl, "name", "load");
        l.bus = req_str(jl, "bus", "load '" + l.name + "'");
        check_bus_ref(l.bus, l.name);
        const double peak_mw = req_num(jl, "peak", "load '" + l.name + "'");
        if (peak_mw <= 0.0)
            throw ValidationError("invariant violation: load '" + l.name + "' peak must be > 0");
        l.peak = peak_mw / base;
        claim_name(l.name, "load");
        sys.loads_.push_back(std::move(l));
    }

    for (const auto& js : doc.value("storage", json::array())) {
        Storage s;
        s.name = req_str(js, "name", "storage");
        const std::string ctx = "storage '" + s.name + "'";
        s.bus = req_str(js, "bus", ctx);
        check_bus_ref(s.bus, s.name);
        const double cap_mwh = req_num(js, "energy_cap", ctx);
        const double pch = req_num(js, "p_charge_max", ctx);
        const double pdis = req_num(js, "p_discharge_max", ctx);
        if (cap_mwh <= 0.0 || pch <= 0.0 || pdis <= 0.0)
            throw ValidationError("invariant violation: " + ctx + " capacities must be > 0");
        s.energy_cap = cap_mwh / base;
        s.p_charge_max = pch / base;
        s.p_discharge_max = pdis / base;
        s.eff_charge = req_num(js, "eff_charge", ctx);
        s.eff_discharge = req_num(js, "eff_discharge", ctx);
        if (s.eff_charge <= 0.0 || s.eff_charge > 1.0 || s.eff_discharge <= 0.0 ||
            s.eff_discharge > 1.0)
            throw ValidationError("invariant violation: " + ctx + " efficiencies must be in (0, 1]");
        if (js.contains("initial_soc")) {
            const double soc_mwh = js.at("initial_soc").get<double>();
            if (soc_mwh < 0.0 || soc_mwh > cap_mwh)
                throw ValidationError("invariant violation: " + ctx +
                                      " initial_soc must lie in [0, energy_cap]");
            s.initial_soc = soc_mwh / base;
        }
        claim_name(s.name, "storage");
        sys.storages_.push_back(std::move(s));
    }

    for (const auto& jr : doc.value("reserves", json::array())) {
        ReserveProduct r;
        r.name = req_str(jr, "name", "reserve");
        const std::string ctx = "reserve '" + r.name + "'";
        r.direction = jr.value("direction", "up");
        if (r.direction != "up") schema_error(ctx, "only direction 'up' is supported");
        for (const auto& d : req(jr, "contributing_devices", ctx))
            r.contributing_devices.push_back(d.get<std::string>());
        if (r.contributing_devices.empty())
            throw ValidationError("invariant violation: " + ctx + " has no contributing devices");
        r.requirement_series_name = req_str(jr, "requirement_series_name", ctx);
        claim_name(r.name, "reserve");
        sys.reserves_.push_back(std::move(r));
    }

    for (const auto& r : sys.reserves_) {
        for (const auto& d : r.contributing_devices) {
            if (sys.find_thermal(d) == nullptr && sys.find_storage(d) == nullptr)
                throw ValidationError("dangling component reference: reserve '" + r.name +
                                      "' contributor '" + d + "' is not a thermal or storage unit");
        }
        sys.component_kind_.emplace(r.requirement_series_name, "requirement_series");
    }

    // --- time series manifest -------------------------------------------
    std::map<std::string, Csv> csv_cache;
    auto load_csv = [&](const std::string& rel) -> const Csv& {
        auto it = csv_cache.find(rel);
        if (it != csv_cache.end()) return it->second;
        const fs::path p = base_dir / rel;
        return csv_cache.emplace(rel, read_csv(p.string())).first->second;
    };

    for (const auto& jt : doc.value("time_series", json::array())) {
        const std::string kind = req_str(jt, "kind", "time_series entry");
        const std::string component = req_str(jt, "component", "time_series entry");
        const std::string label = req_str(jt, "label", "time_series entry");
        const std::string ctx = "time_series (" + component + ", " + label + ")";
        if (!sys.component_kind_.contains(component))
            throw ValidationError("dangling component reference: time series for unknown component '" +
                                  component + "'");
        const std::string file = req_str(jt, "file", ctx);
        const std::string column = jt.value("column", component);
        const TimeSpan resolution = parse_duration(req_str(jt, "resolution", ctx));
        if (!resolution.positive()) schema_error(ctx, "resolution must be positive");
        const Csv& csv = load_csv(file);
        const int vcol = csv.column(column);
        if (vcol < 0) schema_error(ctx, "column '" + column + "' not found in '" + file + "'");

        if (kind == "forecast") {
            Forecast f;
            f.component = component;
            f.label = label;
            f.resolution = resolution;
            f.issue_interval = parse_duration(req_str(jt, "issue_interval", ctx));
            f.horizon_steps = req_int(jt, "horizon_steps", ctx);
            if (f.horizon_steps <= 0) schema_error(ctx, "horizon_steps must be > 0");
            if (!f.issue_interval.positive()) schema_error(ctx, "issue_interval must be positive");
            const int icol = csv.column("issue_time");
            const int tcol = csv.column("timestamp");
            if (icol < 0 || tcol < 0)
                schema_error(ctx, "forecast CSV '" + file + "' needs issue_time and timestamp columns");
            bool have_issue = false;
            TimePoint cur_issue{};
            std::vector<double> window;
            auto close_window = [&]() {
                if (!have_issue) return;
                if (static_cast<int>(window.size()) != f.horizon_steps)
                    throw ValidationError(ctx + ": window issued " + format_iso8601(cur_issue) +
                                          " has " + std::to_string(window.size()) +
                                          " values, expected " + std::to_string(f.horizon_steps));
                if (f.windows.empty()) {
                    f.first_issue = cur_issue;
                } else {
                    const TimePoint expected =
                        f.first_issue + f.issue_interval * static_cast<std::int64_t>(f.windows.size());
                    if (cur_issue != expected)
                        throw ValidationError(ctx + ": issue times not equally spaced; expected " +
                                              format_iso8601(expected) + ", found " +
                                              format_iso8601(cur_issue));
                }
                f.windows.push_back(std::move(window));
                window.clear();
            };
            for (const auto& row : csv.rows) {
                const TimePoint issue = parse_iso8601(row[static_cast<size_t>(icol)]);
                const TimePoint ts = parse_iso8601(row[static_cast<size_t>(tcol)]);
                if (!have_issue || issue != cur_issue) {
                    close_window();
                    cur_issue = issue;
                    have_issue = true;
                }
                const TimePoint expected_ts =
                    cur_issue + f.resolution * static_cast<std::int64_t>(window.size());
                if (ts != expected_ts)
                    throw ValidationError(ctx + ": timestamp " + format_iso8601(ts) +
                                          " off the resolution grid (expected " +
                                          format_iso8601(expected_ts) + ")");
                window.push_back(parse_value(row[static_cast<size_t>(vcol)], ctx));
            }
            close_window();
            if (f.windows.empty())
                throw ValidationError(ctx + ": no forecast windows in '" + file + "'");
            sys.forecasts_.push_back(std::move(f));
        } else if (kind == "realization") {
            RealizationSeries r;
            r.component = component;
            r.label = label;
            r.resolution = resolution;
            const int tcol = csv.column("timestamp");
            if (tcol < 0) schema_error(ctx, "realization CSV '" + file + "' needs a timestamp column");
            bool first_row = true;
            for (const auto& row : csv.rows) {
                const TimePoint ts = parse_iso8601(row[static_cast<size_t>(tcol)]);
                if (first_row) {
                    r.start = ts;
                    first_row = false;
                } else {
                    const TimePoint expected =
                        r.start + r.resolution * static_cast<std::int64_t>(r.values.size());
                    if (ts != expected)
                        throw ValidationError(ctx + ": timestamp " + format_iso8601(ts) +
                                              " off the resolution grid (expected " +
                                              format_iso8601(expected) + ")");
                }
                r.values.push_back(parse_value(row[static_cast<size_t>(vcol)], ctx));
            }
            if (r.values.empty()) throw ValidationError(ctx + ": no rows in '" + file + "'");
            sys.realizations_.push_back(std::move(r));
        } else {
            schema_error(ctx, "unknown time_series kind '" + kind + "'");
        }
    }

    for (const auto& r : sys.reserves_) {
        bool attached = false;
        for (const auto& f : sys.forecasts_)
            attached |= f.component == r.requirement_series_name;
        for (const auto& s : sys.realizations_)
            attached |= s.component == r.requirement_series_name;
        if (!attached)
            throw ValidationError("invariant violation: reserve '" + r.name +
                                  "' requirement series '" + r.requirement_series_name +
                                  "' has no attached time series");
    }

    return sys;
}

} // namespace opsim
