#pragma once

// Programmatic fixture authoring for tests: writes system descriptors, CSV
// time series and simulation configs through the same file interfaces the
// CLI consumes.

#include <string>

namespace opsim::testing {

std::string fixture_path(const std::string& rel);

void write_text(const std::string& path, const std::string& content);

// Unique scratch directory under the system temp dir; removed by the caller.
std::string make_temp_dir(const std::string& tag);

struct FivebusOptions {
    int days = 3;
    bool perturb_actuals = true;   // actuals deviate slightly from forecasts
    bool with_initial_conditions = true;
};

// The 5-bus / 6-line / 5-thermal fixture: descriptor, forecast and actuals
// CSVs, and a UC -> ED -> emulator simulation config.
void write_fivebus_fixture(const std::string& dir, const FivebusOptions& opt = {});

struct TwinOptions {
    bool actuals_equal_forecasts = true;
    int days = 2;
    std::string chronology = "InterProblemChronology";
};

// Minimal two-generator system whose emulator formulation matches the
// innermost (1-step) decision model; used by the chronology equivalence
// tests.
void write_twin_fixture(const std::string& dir, const TwinOptions& opt = {});

} // namespace opsim::testing
