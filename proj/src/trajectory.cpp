#include "scramble/trajectory.hpp"

#include <algorithm>
#include <cmath>

#include "scramble/rng.hpp"

namespace scramble {

std::span<const MeasurementEvent> MeasurementPattern::events_at(int step) const {
    auto lo = std::lower_bound(events.begin(), events.end(), step,
                               [](const MeasurementEvent& e, int s) { return e.step < s; });
    auto hi = std::upper_bound(lo, events.end(), step,
                               [](int s, const MeasurementEvent& e) { return s < e.step; });
    return {lo, hi};
}

MeasurementPattern sample_pattern(double p, int L, int n_steps, std::uint64_t seed) {
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("sample_pattern: p must lie in [0, 1]");
    if (L < 1 || L > kMaxSites) throw std::invalid_argument("sample_pattern: bad L");
    if (n_steps < 0) throw std::invalid_argument("sample_pattern: negative number of steps");

    MeasurementPattern pattern{p, seed, L, n_steps, {}};
    if (p == 0.0) return pattern;
    Rng rng(seed);
    std::bernoulli_distribution measured(p);
    std::bernoulli_distribution up(0.5);
    for (int step = 1; step <= n_steps; ++step) {
        for (int site = 0; site < L; ++site) {
            if (measured(rng)) pattern.events.push_back({step, site, up(rng) ? 1 : -1});
        }
    }
    return pattern;
}

EvolutionOperator EvolutionOperator::identity(int L) {
    if (L < 1 || L > kMaxSites) throw std::invalid_argument("EvolutionOperator: bad L");
    const auto N = static_cast<Eigen::Index>(std::size_t{1} << L);
    return {L, ComplexMatrix::Identity(N, N), 0};
}

double EvolutionOperator::norm_error() const {
    return std::abs(matrix.squaredNorm() / static_cast<double>(dim()) - 1.0);
}

namespace {

inline bool row_kept(Eigen::Index row, int site, int outcome) {
    const bool bit = (row >> site) & 1;
    return bit == (outcome == -1);
}

}  // namespace

void advance(EvolutionOperator& K, const Propagator& U, int n_unitary, std::span<MeasurementEvent> events,
             std::vector<Redraw>* redraws) {
    if (n_unitary < 0) throw std::invalid_argument("advance: negative number of unitary steps");
    if (K.dim() != U.dim()) throw std::invalid_argument("advance: operator and propagator dimensions differ");
    for (const auto& e : events) {
        if (e.site < 0 || e.site >= K.L) throw std::out_of_range("advance: event site out of range");
        if (e.outcome != 1 && e.outcome != -1) throw std::invalid_argument("advance: outcome must be +-1");
    }

    const auto N = static_cast<Eigen::Index>(K.dim());
    ComplexMatrix evolved = K.matrix;
    U.apply_power(n_unitary, evolved);

    // Projectors are row masks, so the norm after any subset of them is a sum
    // of squared row norms; the annihilation check never touches the matrix.
    Eigen::VectorXd row_weight = evolved.rowwise().squaredNorm();
    std::vector<char> keep(static_cast<std::size_t>(N), 1);
    const double threshold = kAnnihilationTolerance * kAnnihilationTolerance * static_cast<double>(N);

    std::sort(events.begin(), events.end(),
              [](const MeasurementEvent& a, const MeasurementEvent& b) { return a.site < b.site; });
    auto surviving_weight = [&](int site, int outcome) {
        double w = 0.0;
        for (Eigen::Index r = 0; r < N; ++r)
            if (keep[r] && row_kept(r, site, outcome)) w += row_weight(r);
        return w;
    };

    std::vector<int> outcomes;
    outcomes.reserve(events.size());
    for (const auto& e : events) {
        int outcome = e.outcome;
        if (surviving_weight(e.site, outcome) < threshold) {
            outcome = -outcome;
            if (surviving_weight(e.site, outcome) < threshold)
                throw TrajectoryAborted("both outcomes annihilate K at step " + std::to_string(K.step + n_unitary) +
                                        ", site " + std::to_string(e.site));
        }
        for (Eigen::Index r = 0; r < N; ++r)
            if (!row_kept(r, e.site, outcome)) keep[r] = 0;
        outcomes.push_back(outcome);
    }

    double norm2 = 0.0;
    for (Eigen::Index r = 0; r < N; ++r) {
        if (keep[r]) norm2 += row_weight(r);
        else evolved.row(r).setZero();
    }
    if (norm2 < threshold) throw TrajectoryAborted("evolution operator annihilated");
    evolved *= std::sqrt(static_cast<double>(N) / norm2);

    // Commit only after success so an abort leaves K and the events untouched.
    for (std::size_t i = 0; i < events.size(); ++i) {
        if (outcomes[i] != events[i].outcome) {
            events[i].outcome = outcomes[i];
            if (redraws) redraws->push_back({K.step + n_unitary, events[i].site});
        }
    }
    K.matrix = std::move(evolved);
    K.step += n_unitary;
}

void step(EvolutionOperator& K, const Propagator& U, std::span<MeasurementEvent> events,
          std::vector<Redraw>* redraws) {
    advance(K, U, 1, events, redraws);
}

bool Recorder::records(int step, int n_steps) const {
    if (step == n_steps) return true;
    if (step < start) return false;
    return step % stride == 0;
}

namespace {

class RecordSink final : public ObservationSink {
public:
    RecordSink(TrajectoryRecord& record, int step) : record_(record), step_(step) {}
    void add(std::string_view name, double value) override {
        record_.series[std::string(name)].push_back({step_, value});
    }

private:
    TrajectoryRecord& record_;
    int step_;
};

}  // namespace

const std::vector<SeriesPoint>& TrajectoryRecord::at(const std::string& name) const {
    auto it = series.find(name);
    if (it == series.end()) throw std::out_of_range("TrajectoryRecord: no series named " + name);
    return it->second;
}

TrajectoryRecord evolve(const ModelParams& params, const Propagator& U, double p, std::uint64_t seed,
                        int n_steps, const Recorder& recorder) {
    params.validate();
    if (recorder.stride < 1) throw std::invalid_argument("evolve: stride must be >= 1");
    if (U.dim() != params.dim()) throw std::invalid_argument("evolve: propagator does not match params");

    MeasurementPattern pattern = sample_pattern(p, params.L, n_steps, seed);
    TrajectoryRecord record{params, p, seed, n_steps, {}, {}, {}, false, {}};

    EvolutionOperator K = EvolutionOperator::identity(params.L);
    auto observe = [&] {
        if (!recorder.observe) return;
        RecordSink sink(record, K.step);
        recorder.observe(K, sink);
    };
    if (recorder.records(0, n_steps)) observe();

    int pending = 0;
    auto first = pattern.events.begin();
    for (int t = 1; t <= n_steps; ++t) {
        auto last = std::find_if(first, pattern.events.end(), [t](const MeasurementEvent& e) { return e.step != t; });
        const bool record_now = recorder.records(t, n_steps);
        ++pending;
        if (first == last && !record_now) continue;
        try {
            advance(K, U, pending, std::span<MeasurementEvent>(first, last), &record.redraws);
        } catch (const TrajectoryAborted& e) {
            record.aborted = true;
            record.abort_reason = e.what();
            break;
        }
        pending = 0;
        first = last;
        if (record_now) observe();
    }
    record.events = std::move(pattern.events);
    return record;
}

void to_json(nlohmann::json& j, const ModelParams& params) {
    j = nlohmann::json{{"L", params.L},         {"J_zz", params.J_zz},
                       {"h_x", params.h_x},     {"h_z", params.h_z},
                       {"boundary", to_string(params.boundary)}, {"delta_t", params.delta_t}};
}

void from_json(const nlohmann::json& j, ModelParams& params) {
    params.L = j.at("L").get<int>();
    params.J_zz = j.at("J_zz").get<double>();
    params.h_x = j.at("h_x").get<double>();
    params.h_z = j.at("h_z").get<double>();
    params.boundary = boundary_from_string(j.at("boundary").get<std::string>());
    params.delta_t = j.value("delta_t", 1.0);
}

void to_json(nlohmann::json& j, const TrajectoryRecord& record) {
    nlohmann::json events = nlohmann::json::array();
    for (const auto& e : record.events) events.push_back({{"step", e.step}, {"site", e.site}, {"outcome", e.outcome}});
    nlohmann::json redraws = nlohmann::json::array();
    for (const auto& r : record.redraws) redraws.push_back({{"step", r.step}, {"site", r.site}});
    nlohmann::json series = nlohmann::json::object();
    for (const auto& [name, points] : record.series) {
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& pt : points) arr.push_back({pt.step, pt.value});
        series[name] = std::move(arr);
    }
    j = nlohmann::json{{"params", record.params}, {"p", record.p},           {"seed", record.seed},
                       {"n_steps", record.n_steps}, {"events", std::move(events)}, {"redraws", std::move(redraws)},
                       {"series", std::move(series)}};
    if (record.aborted) j["abort"] = record.abort_reason;
}

}  // namespace scramble
