#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "scramble/spin_core.hpp"

namespace scramble {

struct MeasurementEvent {
    int step = 1;     // 1-based time step
    int site = 0;
    int outcome = 1;  // +1 or -1
};

// An outcome that was flipped because the drawn one annihilated K.
struct Redraw {
    int step = 0;
    int site = 0;
};

struct MeasurementPattern {
    double p = 0.0;
    std::uint64_t seed = 0;
    int L = 0;
    int n_steps = 0;
    std::vector<MeasurementEvent> events;  // sorted by (step, site)

    std::span<const MeasurementEvent> events_at(int step) const;
};

// Independent Bernoulli(p) event on every (step, site) with a fair +-1 outcome.
MeasurementPattern sample_pattern(double p, int L, int n_steps, std::uint64_t seed);

// Non-unitary evolution operator normalized to ||K||_F^2 = 2^L.
struct EvolutionOperator {
    int L = 0;
    ComplexMatrix matrix;
    int step = 0;

    static EvolutionOperator identity(int L);
    std::size_t dim() const { return std::size_t{1} << L; }
    // | ||K||_F^2 / N - 1 |
    double norm_error() const;
};

class TrajectoryAborted : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Frobenius norm below this fraction of sqrt(N) counts as annihilated.
inline constexpr double kAnnihilationTolerance = 1e-10;

/// One step: K <- sqrt(N) M U K / ||M U K||_F with M the product of the
/// step's projectors (row masks, ascending site order).
///
/// If a projector would annihilate K its outcome is flipped in place and
/// recorded in `redraws`; if both outcomes annihilate, TrajectoryAborted is
/// thrown and K is left unchanged.
void step(EvolutionOperator& K, const Propagator& U, std::span<MeasurementEvent> events,
          std::vector<Redraw>* redraws = nullptr);

// Same as step() but applies U^n_unitary before the projectors; used to fold
// runs of measurement-free steps into one multiplication.
void advance(EvolutionOperator& K, const Propagator& U, int n_unitary,
             std::span<MeasurementEvent> events, std::vector<Redraw>* redraws = nullptr);

class ObservationSink {
public:
    virtual ~ObservationSink() = default;
    virtual void add(std::string_view name, double value) = 0;
};

struct Recorder {
    int stride = 1;
    int start = 0;  // no recordings before this step
    std::function<void(const EvolutionOperator&, ObservationSink&)> observe;

    // Recordings happen at step 0 (if start == 0), at multiples of stride
    // that are >= start, and always at the final step.
    bool records(int step, int n_steps) const;
};

struct SeriesPoint {
    int step = 0;
    double value = 0.0;
};

struct TrajectoryRecord {
    ModelParams params;
    double p = 0.0;
    std::uint64_t seed = 0;
    int n_steps = 0;
    std::vector<MeasurementEvent> events;
    std::vector<Redraw> redraws;
    std::map<std::string, std::vector<SeriesPoint>> series;
    bool aborted = false;
    std::string abort_reason;

    const std::vector<SeriesPoint>& at(const std::string& name) const;
};

TrajectoryRecord evolve(const ModelParams& params, const Propagator& U, double p, std::uint64_t seed,
                        int n_steps, const Recorder& recorder);

void to_json(nlohmann::json& j, const ModelParams& params);
void from_json(const nlohmann::json& j, ModelParams& params);
void to_json(nlohmann::json& j, const TrajectoryRecord& record);

}  // namespace scramble
