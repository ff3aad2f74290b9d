#pragma once
// Seeded generator of irregular meter readings with known anomalous accounts.

#include "tsrisk/preprocess.hpp"

#include <json.hpp>

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace tsrisk {

enum class Profile : std::uint8_t { residential, sme, industrial };
enum class Cadence : std::uint8_t { quarterly, monthly, arbitrary };

struct SynthConfig {
    std::size_t accounts = 2000;
    Horizon horizon;
    std::array<double, 3> profile_weights{0.75, 0.2, 0.05};  // residential, sme, industrial
    std::array<double, 3> cadence_weights{0.7, 0.2, 0.1};    // quarterly, monthly, arbitrary
    double anomaly_fraction = 0.01;
    /// Scale of the month-to-month swings injected into anomalous accounts.
    double anomaly_amplitude = 1.0;
    /// Relative month-to-month noise of normal consumption.
    double noise = 0.08;
    /// Share of accounts that stop reporting before the horizon ends.
    double early_end_fraction = 0.1;
    /// Share of accounts that never consume anything.
    double idle_fraction = 0.005;
    /// Per-reading probability of an absurd meter value.
    double glitch_probability = 0.0005;
    std::uint64_t seed = 7;

    void validate() const;
};

nlohmann::json to_json(const SynthConfig& config);
/// Strict: unknown keys raise UsageError. Missing keys keep defaults.
SynthConfig synth_config_from_json(const nlohmann::json& j, SynthConfig base = {});

struct SynthAccount {
    std::string id;
    Profile profile = Profile::residential;
    Cadence cadence = Cadence::quarterly;
    bool anomalous = false;
};

struct SynthData {
    std::vector<RawReading> readings; // by account id, then date
    std::vector<std::string> labels;  // ascending
    std::vector<SynthAccount> accounts;
};

/// floor(anomaly_fraction * accounts) anomalous accounts, all of them
/// labeled. Identical configs give identical output.
SynthData generate(const SynthConfig& config);

const char* profile_name(Profile p);
const char* cadence_name(Cadence c);

} // namespace tsrisk
