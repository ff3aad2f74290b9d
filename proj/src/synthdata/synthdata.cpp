#include "tsrisk/synthdata.hpp"

#include "tsrisk/errors.hpp"
#include "tsrisk/random.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

namespace tsrisk {

namespace {

constexpr double kGlitchValue = 1e12;

std::vector<double> weights(const std::array<double, 3>& w)
{
    return {w[0], w[1], w[2]};
}

void check_weights(const std::array<double, 3>& w, const char* what)
{
    double total = 0.0;
    for (double v : w) {
        if (!(v >= 0.0) || !std::isfinite(v)) {
            throw UsageError(std::string("synth config: ") + what + " weights must be non-negative");
        }
        total += v;
    }
    if (std::abs(total - 1.0) > 1e-9) {
        throw UsageError(std::string("synth config: ") + what + " weights must sum to 1");
    }
}

void check_probability(double p, const char* what, bool allow_one)
{
    if (!(p >= 0.0) || (allow_one ? p > 1.0 : p >= 1.0)) {
        throw UsageError(std::string("synth config: ") + what + (allow_one ? " must lie in [0, 1]" : " must lie in [0, 1)"));
    }
}

std::array<double, 3> weights_from_json(const nlohmann::json& j, const char* a, const char* b, const char* c,
                                        std::array<double, 3> w, const char* what)
{
    if (!j.is_object()) {
        throw UsageError(std::string("synth config: ") + what + " must be an object");
    }
    for (const auto& item : j.items()) {
        if (item.key() == a) {
            w[0] = item.value().get<double>();
        } else if (item.key() == b) {
            w[1] = item.value().get<double>();
        } else if (item.key() == c) {
            w[2] = item.value().get<double>();
        } else {
            throw UsageError(std::string("synth config: unknown ") + what + " key '" + item.key() + "'");
        }
    }
    return w;
}

struct Pattern {
    double base;
    double amplitude;
    double peak; // month of the seasonal maximum, 0 = January
};

Pattern draw_shape(Profile p, Rng& rng)
{
    switch (p) {
    case Profile::residential: return {rng.uniform(150.0, 500.0), rng.uniform(0.2, 0.4), rng.uniform(-1.0, 1.0)};
    case Profile::sme: return {rng.uniform(1500.0, 6000.0), rng.uniform(0.05, 0.2), rng.uniform(5.0, 7.0)};
    case Profile::industrial: return {rng.uniform(2e4, 9e4), rng.uniform(0.0, 0.1), rng.uniform(0.0, 12.0)};
    }
    return {};
}

// Month indices at which the meter is read, ascending, within [0, end].
std::vector<std::size_t> reading_months(Cadence cadence, std::size_t end, Rng& rng)
{
    std::vector<std::size_t> months;
    std::size_t m = 0;
    switch (cadence) {
    case Cadence::monthly:
        for (m = 0; m <= end; ++m) {
            months.push_back(m);
        }
        return months;
    case Cadence::quarterly: m = rng.below(3); break;
    case Cadence::arbitrary: m = rng.below(6); break;
    }
    while (m <= end) {
        months.push_back(m);
        if (cadence == Cadence::quarterly) {
            const double u = rng.uniform();
            m += u < 0.1 ? 2 : (u < 0.2 ? 4 : 3);
        } else {
            m += 1 + rng.below(6);
        }
    }
    return months;
}

Source source_for(Profile p, Cadence c, Rng& rng)
{
    switch (p) {
    case Profile::residential: return Source::manual;
    case Profile::sme: return c == Cadence::monthly || rng.bernoulli(0.3) ? Source::telemeter_lv : Source::manual;
    case Profile::industrial: return Source::telemeter_mv;
    }
    return Source::manual;
}

} // namespace

const char* profile_name(Profile p)
{
    switch (p) {
    case Profile::residential: return "residential";
    case Profile::sme: return "sme";
    case Profile::industrial: return "industrial";
    }
    return "?";
}

const char* cadence_name(Cadence c)
{
    switch (c) {
    case Cadence::quarterly: return "quarterly";
    case Cadence::monthly: return "monthly";
    case Cadence::arbitrary: return "arbitrary";
    }
    return "?";
}

void SynthConfig::validate() const
{
    if (accounts == 0) {
        throw UsageError("synth config: accounts must be >= 1");
    }
    if (horizon.months() < 24) {
        throw UsageError("synth config: horizon must span at least 24 months");
    }
    check_weights(profile_weights, "profile");
    check_weights(cadence_weights, "cadence");
    check_probability(anomaly_fraction, "anomaly_fraction", false);
    check_probability(early_end_fraction, "early_end_fraction", true);
    check_probability(idle_fraction, "idle_fraction", true);
    check_probability(glitch_probability, "glitch_probability", true);
    if (!(anomaly_amplitude >= 0.0) || !(noise >= 0.0) || !std::isfinite(anomaly_amplitude) || !std::isfinite(noise)) {
        throw UsageError("synth config: anomaly_amplitude and noise must be non-negative");
    }
}

nlohmann::json to_json(const SynthConfig& c)
{
    return {
        {"accounts", c.accounts},
        {"horizon_start", format_year_month(c.horizon.first)},
        {"horizon_end", format_year_month(c.horizon.last)},
        {"profile_weights",
         {{"residential", c.profile_weights[0]}, {"sme", c.profile_weights[1]}, {"industrial", c.profile_weights[2]}}},
        {"cadence_weights",
         {{"quarterly", c.cadence_weights[0]}, {"monthly", c.cadence_weights[1]}, {"arbitrary", c.cadence_weights[2]}}},
        {"anomaly_fraction", c.anomaly_fraction},
        {"anomaly_amplitude", c.anomaly_amplitude},
        {"noise", c.noise},
        {"early_end_fraction", c.early_end_fraction},
        {"idle_fraction", c.idle_fraction},
        {"glitch_probability", c.glitch_probability},
        {"seed", c.seed},
    };
}

SynthConfig synth_config_from_json(const nlohmann::json& j, SynthConfig c)
{
    if (!j.is_object()) {
        throw UsageError("synth config: expected an object");
    }
    auto month = [](const nlohmann::json& v, const char* key) {
        const auto ym = parse_year_month(v.get<std::string>());
        if (!ym) {
            throw UsageError(std::string("synth config: ") + key + " must be YYYY-MM");
        }
        return *ym;
    };
    try {
        for (const auto& item : j.items()) {
            const std::string& key = item.key();
            const nlohmann::json& v = item.value();
            if (key == "accounts") {
                c.accounts = v.get<std::size_t>();
            } else if (key == "horizon_start") {
                c.horizon.first = month(v, "horizon_start");
            } else if (key == "horizon_end") {
                c.horizon.last = month(v, "horizon_end");
            } else if (key == "profile_weights") {
                c.profile_weights = weights_from_json(v, "residential", "sme", "industrial", c.profile_weights, "profile");
            } else if (key == "cadence_weights") {
                c.cadence_weights = weights_from_json(v, "quarterly", "monthly", "arbitrary", c.cadence_weights, "cadence");
            } else if (key == "anomaly_fraction") {
                c.anomaly_fraction = v.get<double>();
            } else if (key == "anomaly_amplitude") {
                c.anomaly_amplitude = v.get<double>();
            } else if (key == "noise") {
                c.noise = v.get<double>();
            } else if (key == "early_end_fraction") {
                c.early_end_fraction = v.get<double>();
            } else if (key == "idle_fraction") {
                c.idle_fraction = v.get<double>();
            } else if (key == "glitch_probability") {
                c.glitch_probability = v.get<double>();
            } else if (key == "seed") {
                c.seed = v.get<std::uint64_t>();
            } else {
                throw UsageError("synth config: unknown key '" + key + "'");
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw UsageError(std::string("synth config: ") + e.what());
    }
    c.validate();
    return c;
}

SynthData generate(const SynthConfig& config)
{
    config.validate();
    const std::size_t n = config.accounts;
    const std::size_t months = config.horizon.months();

    // The tolerance absorbs representation error in products such as 0.29 * 100.
    const auto anomalies =
        static_cast<std::size_t>(std::floor(config.anomaly_fraction * static_cast<double>(n) + 1e-9));
    std::vector<std::uint8_t> anomalous(n, 0);
    {
        Rng pick(derive_seed(config.seed, 0));
        for (std::size_t i : pick.sample(n, anomalies)) {
            anomalous[i] = 1;
        }
    }

    SynthData out;
    const std::size_t digits = std::max<std::size_t>(6, std::to_string(n).size());
    for (std::size_t i = 0; i < n; ++i) {
        Rng rng(derive_seed(config.seed, i + 1));
        std::string id = std::to_string(i + 1);
        id = "A" + std::string(digits - std::min(id.size(), digits), '0') + id;

        SynthAccount acc;
        acc.id = id;
        acc.anomalous = anomalous[i] != 0;
        acc.profile = static_cast<Profile>(rng.pick(weights(config.profile_weights)));
        acc.cadence = static_cast<Cadence>(rng.pick(weights(config.cadence_weights)));

        // Anomalous accounts are kept active and reporting to the end so
        // every label survives cleaning.
        const bool idle = rng.bernoulli(config.idle_fraction) && !acc.anomalous;
        std::size_t end = months - 1;
        if (rng.bernoulli(config.early_end_fraction) && !acc.anomalous) {
            end = rng.below(months);
        }

        const Pattern shape = draw_shape(acc.profile, rng);
        const double trend = rng.uniform(-0.1, 0.1) / 12.0;
        std::vector<double> monthly(months, 0.0);
        for (std::size_t t = 0; t < months; ++t) {
            const double season =
                1.0 + shape.amplitude * std::cos(2.0 * std::numbers::pi * (static_cast<double>(t) - shape.peak) / 12.0);
            const double wobble = std::max(0.0, 1.0 + config.noise * rng.normal());
            monthly[t] = idle ? 0.0 : shape.base * season * (1.0 + trend * static_cast<double>(t)) * wobble;
        }

        if (acc.anomalous) {
            // From the intervention on: alternating tampered / untouched
            // stretches, with amplified month-to-month swings throughout.
            std::size_t t = 12 + rng.below(months - 24);
            bool tampered = true;
            while (t < months) {
                const std::size_t len = 3 + rng.below(7);
                const double level = tampered ? rng.uniform(0.15, 0.5) : 1.0;
                for (std::size_t k = 0; k < len && t < months; ++k, ++t) {
                    const double swing = std::max(0.02, 1.0 + config.anomaly_amplitude * rng.normal());
                    monthly[t] *= level * swing;
                }
                tampered = !tampered;
            }
        }

        const Source source = source_for(acc.profile, acc.cadence, rng);
        std::size_t prev = 0;
        for (std::size_t m : reading_months(acc.cadence, end, rng)) {
            double value = 0.0;
            for (std::size_t t = prev; t <= m; ++t) {
                value += monthly[t];
            }
            prev = m + 1;
            value = std::round(value * 100.0) / 100.0;
            if (rng.bernoulli(config.glitch_probability)) {
                value = kGlitchValue;
            }
            out.readings.push_back({acc.id, config.horizon.month_at(m), value, source});
        }

        if (acc.anomalous) {
            out.labels.push_back(acc.id);
        }
        out.accounts.push_back(std::move(acc));
    }
    return out;
}

} // namespace tsrisk
