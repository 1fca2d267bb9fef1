#include "opsim/config.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>

namespace opsim {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace {

ProblemTemplate parse_template(const ordered_json& jt, const std::string& ctx) {
    ProblemTemplate tmpl;
    if (!jt.contains("network"))
        throw ValidationError(ctx + ": template needs a 'network' formulation");
    tmpl.network = network_formulation_from_string(jt.at("network").get<std::string>());
    const ordered_json devices = jt.value("devices", ordered_json::object());
    for (const auto& [type, form] : devices.items()) tmpl.device_map[type] = form.get<std::string>();
    const ordered_json services = jt.value("services", ordered_json::object());
    for (const auto& [service, form] : services.items())
        tmpl.service_map[service] = form.get<std::string>();
    return tmpl;
}

std::vector<std::string> resolve_components(const std::vector<std::string>& raw,
                                            FeedforwardKind kind, const SystemModel& sys) {
    if (raw.size() == 1 && raw.front() == "*") {
        std::vector<std::string> all;
        if (kind == FeedforwardKind::EnergyTarget) {
            for (const auto& s : sys.storages()) all.push_back(s.name);
        } else {
            for (const auto& g : sys.thermal_gens()) all.push_back(g.name);
        }
        return all;
    }
    return raw;
}

} // namespace

LoadedSimulation load_simulation_config(const std::string& config_path,
                                        const std::string& output_override) {
    if (!fs::exists(config_path))
        throw IoError("missing file: simulation config '" + config_path + "'");
    std::ifstream in(config_path);
    ordered_json doc;
    try {
        doc = ordered_json::parse(in);
    } catch (const ordered_json::exception& e) {
        throw ValidationError("config '" + config_path + "' is not valid JSON: " + e.what());
    }
    const fs::path base_dir = fs::absolute(fs::path(config_path)).parent_path();

    if (!doc.contains("system")) throw ValidationError("config: missing 'system' descriptor path");
    const fs::path system_path = base_dir / doc.at("system").get<std::string>();
    SystemModel sys = SystemModel::load(system_path.string());

    SimulationDef def;
    const auto& span = doc.at("span");
    def.start = parse_iso8601(span.at("start").get<std::string>());
    def.n_steps = span.at("steps").get<int>();
    def.chronology = chronology_from_string(
        doc.value("chronology", std::string("InterProblemChronology")));

    if (const auto js = doc.find("store"); js != doc.end()) {
        const std::string backend = js->value("backend", std::string("file"));
        if (backend == "memory") def.store.backend = StoreConfig::Backend::Memory;
        else if (backend == "file") def.store.backend = StoreConfig::Backend::File;
        else throw ValidationError("config: unknown store backend '" + backend + "'");
        def.store.write_batch_min = js->value("write_batch_min_bytes", std::uint64_t{1} << 20);
        def.store.read_cache_entries = js->value("read_cache_entries", 64);
        def.store.compression = js->value("compression", true);
    } else {
        def.store.backend = StoreConfig::Backend::File;
    }
    if (const auto jo = doc.find("solver"); jo != doc.end()) {
        def.solver.max_iterations = jo->value("max_iterations", def.solver.max_iterations);
        def.solver.node_limit = jo->value("node_limit", def.solver.node_limit);
        def.solver.mip_gap = jo->value("mip_gap", def.solver.mip_gap);
        def.solver.penalty = jo->value("penalty", def.solver.penalty);
    }
    def.halt_on_infeasible = doc.value("halt_on_infeasible", true);

    if (!doc.contains("models") || doc.at("models").empty())
        throw ValidationError("config: at least one decision model is required");
    for (const auto& jm : doc.at("models")) {
        DecisionModelDef d;
        d.name = jm.at("name").get<std::string>();
        d.horizon_steps = jm.at("horizon_steps").get<int>();
        d.resolution = parse_duration(jm.at("resolution").get<std::string>());
        d.interval = parse_duration(jm.at("interval").get<std::string>());
        d.tmpl = parse_template(jm.at("template"), "model '" + d.name + "'");
        def.decisions.push_back(std::move(d));
    }
    if (const auto je = doc.find("emulator"); je != doc.end()) {
        EmulationModelDef e;
        e.name = je->at("name").get<std::string>();
        e.resolution = parse_duration(je->at("resolution").get<std::string>());
        e.tmpl = parse_template(je->at("template"), "emulator '" + e.name + "'");
        def.emulator = std::move(e);
    }
    for (const auto& jf : doc.value("feedforwards", ordered_json::array())) {
        FeedforwardSpec ff;
        ff.kind = feedforward_kind_from_string(jf.at("kind").get<std::string>());
        ff.source_model = jf.at("source").get<std::string>();
        ff.target_model = jf.at("target").get<std::string>();
        ff.source_kind = var_kind_from_string(jf.value("source_kind", std::string("OnStatus")));
        ff.target_kind = var_kind_from_string(jf.value("target_kind", std::string("ActivePower")));
        std::vector<std::string> raw;
        for (const auto& c : jf.at("components")) raw.push_back(c.get<std::string>());
        ff.components = resolve_components(raw, ff.kind, sys);
        def.feedforwards.push_back(std::move(ff));
    }

    const std::string configured_out = doc.value("output_dir", std::string("opsim_out"));
    def.output_dir = output_override.empty()
                         ? (fs::path(configured_out).is_absolute()
                                ? configured_out
                                : (base_dir / configured_out).string())
                         : output_override;

    // Fully-resolved copy for reproduction: absolute paths, defaults
    // materialized, the chosen output directory pinned.
    ordered_json resolved = doc;
    resolved["system"] = system_path.string();
    resolved["output_dir"] = def.output_dir;
    resolved["chronology"] = to_string(def.chronology);
    resolved["halt_on_infeasible"] = def.halt_on_infeasible;
    ordered_json jstore;
    jstore["backend"] = def.store.backend == StoreConfig::Backend::File ? "file" : "memory";
    jstore["write_batch_min_bytes"] = def.store.write_batch_min;
    jstore["read_cache_entries"] = def.store.read_cache_entries;
    jstore["compression"] = def.store.compression;
    resolved["store"] = std::move(jstore);
    ordered_json jsolver;
    jsolver["max_iterations"] = def.solver.max_iterations;
    jsolver["node_limit"] = def.solver.node_limit;
    jsolver["mip_gap"] = def.solver.mip_gap;
    jsolver["penalty"] = def.solver.penalty;
    resolved["solver"] = std::move(jsolver);
    def.resolved_config_json = resolved.dump(1, '\t') + "\n";

    return LoadedSimulation{std::move(sys), std::move(def)};
}

} // namespace opsim
