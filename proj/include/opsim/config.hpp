#pragma once

#include "opsim/executor.hpp"

#include <string>

namespace opsim {

// Declarative simulation configuration: one JSON document referencing the
// system descriptor plus models, emulator, feedforwards, chronology, span,
// store and solver settings.

struct LoadedSimulation {
    SystemModel sys;
    SimulationDef def;
};

// Parses and fully resolves a config file. Relative paths resolve against
// the config's directory; `output_override` (when nonempty) replaces the
// configured output directory. The resolved document is stored in
// def.resolved_config_json and replaying it reproduces the identical run.
LoadedSimulation load_simulation_config(const std::string& config_path,
                                        const std::string& output_override = "");

} // namespace opsim
