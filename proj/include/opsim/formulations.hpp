#pragma once

#include "opsim/feedforwards.hpp"
#include "opsim/opt_container.hpp"
#include "opsim/system_model.hpp"

#include <map>
#include <string>
#include <vector>

namespace opsim {

// The catalog of device/network/service constraint builders and the
// ProblemTemplate mapping component types to formulations. Builders are pure
// functions of their inputs; each build owns its container exclusively.

enum class NetworkFormulation { CopperPlate, PTDFDCPower };

inline constexpr const char* kThermalUC = "ThermalStandardUnitCommitment";
inline constexpr const char* kThermalDispatch = "ThermalBasicDispatch";
inline constexpr const char* kRenewableFullDispatch = "RenewableFullDispatch";
inline constexpr const char* kStaticPowerLoad = "StaticPowerLoad";
inline constexpr const char* kStorageBasicDispatch = "StorageBasicDispatch";
inline constexpr const char* kRangeReserve = "RangeReserve";

struct ProblemTemplate {
    NetworkFormulation network = NetworkFormulation::CopperPlate;
    std::map<std::string, std::string> device_map;  // "ThermalGen" -> formulation name
    std::map<std::string, std::string> service_map; // reserve name -> formulation name
};

NetworkFormulation network_formulation_from_string(const std::string& s);
const char* to_string(NetworkFormulation n);

// --- PTDF -------------------------------------------------------------------

enum class SlackConvention {
    SingleSlack, // slack column identically zero
    Distributed, // uniform distributed slack; every row sums to zero
};

struct PtdfMatrix {
    int n_lines = 0;
    int n_buses = 0;
    int slack = 0;
    std::vector<double> m; // row-major lines x buses

    double at(int line, int bus) const { return m[static_cast<size_t>(line) * n_buses + bus]; }
};

// PTDF = Bf * inv(B_bus reduced by the slack), expanded with the slack
// column. Throws on a disconnected network (singular reduced matrix).
PtdfMatrix compute_ptdf(const SystemModel& sys, const std::string& slack_bus,
                        SlackConvention convention = SlackConvention::SingleSlack);

// --- model build ------------------------------------------------------------

struct BuildOptions {
    int horizon = 1;
    double dt_hours = 1.0;
    bool is_emulator = false;       // adds disabled balance slack columns
    double balance_slack_penalty = 1e6;  // $ per pu-h once activated
    double energy_target_penalty = 1e4;  // $ per MWh of shortfall
};

// Builds the complete container for one problem per the template: argument
// phase (variables and parameters for every formulation), then network
// constraints, then device constraints, then services, then feedforwards,
// then the objective-bearing pieces already accumulated, and finally the
// sanity check. Throws on uncovered component types and on fatal sanity
// findings.
OptContainer build_problem(const ProblemTemplate& tmpl, const SystemModel& sys,
                           const std::string& model_name, const BuildOptions& opt,
                           const std::vector<FeedforwardSpec>& feedforwards = {});

// Individual builders, exposed for targeted tests. They assume the
// argument-phase variables/parameters for their components already exist in
// the container (build_problem arranges that).

struct ThermalBuildFlags {
    bool semicontinuous = false; // commitment statuses arrive as parameters
};

void build_thermal_uc(OptContainer& c, const SystemModel& sys, const ThermalGen& gen,
                      const BuildOptions& opt);
void build_thermal_dispatch(OptContainer& c, const SystemModel& sys, const ThermalGen& gen,
                            const BuildOptions& opt, const ThermalBuildFlags& flags);
void build_renewable(OptContainer& c, const SystemModel& sys, const RenewableGen& gen,
                     const BuildOptions& opt);
void build_storage(OptContainer& c, const SystemModel& sys, const Storage& unit,
                   const BuildOptions& opt);
void build_reserve(OptContainer& c, const SystemModel& sys, const ReserveProduct& product,
                   const BuildOptions& opt, const std::map<std::string, ThermalBuildFlags>& thermal_flags,
                   bool uc_mode);

} // namespace opsim
