#pragma once

#include "rcsim/metrics.hpp"
#include "rcsim/simengine.hpp"
#include "rcsim/topology.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace rcsim
{
    struct RunOptions
    {
        double k_s = 1.0;
        EngineConfig engine{};
        // Optional event trace of the run.
        std::function<void(const TraceRecord &)> trace;
    };

    struct RunReport
    {
        std::string topology;
        std::string controller; // "default", "static-0.8", "script", ...
        double duration = 0.0;
        double k = 1.0;
        double thr_mean = 0.0;
        std::vector<double> thr_series;
        // Tuple-weighted over the whole run; the series holds per-window means.
        double latency_mean = 0.0;
        std::vector<double> latency_series;
        std::vector<double> bp_series;
        double bp_time_total = 0.0;
        std::vector<int> actions; // per window, -1 when off the action grid
    };

    // Fraction pinned for the whole run.
    RunReport run_fixed(const TopologySpec &spec, double fraction, double duration, std::uint64_t seed,
                        const RunOptions &opts = {});
    // Fraction 1.0: back pressure is the only flow control.
    RunReport run_default(const TopologySpec &spec, double duration, std::uint64_t seed, const RunOptions &opts = {});
    // One action per window; the last action repeats if the script is short.
    RunReport run_script(const TopologySpec &spec, const std::vector<int> &actions, double duration,
                         std::uint64_t seed, const RunOptions &opts = {});

    struct SweepResult
    {
        std::vector<RunReport> runs; // actions 0..9
        std::size_t best = 0;
        double best_fraction() const { return action_to_fraction(static_cast<int>(best)); }
    };

    // Same seed for every fraction. Best by thr_mean, ties to the lower latency_mean.
    SweepResult sweep_static(const TopologySpec &spec, double duration, std::uint64_t seed,
                             const RunOptions &opts = {}, unsigned threads = 1);

    struct Comparison
    {
        double thr_gain_pct = 0.0;
        double latency_drop_pct = 0.0;
        double peak_thr_gain_pct = 0.0;
    };

    // Throws std::invalid_argument on mismatched topology or duration.
    Comparison compare(const RunReport &candidate, const RunReport &baseline);

    // Per-window rows in the metrics CSV schema, then
    // "summary,<thr_mean>,<latency_mean>,<bp_time_total>,<action or -1>".
    void write_report_csv(std::ostream &out, const RunReport &report);
    // Reads back what write_report_csv produced (series and summary).
    RunReport read_report_csv(std::istream &in);

    // fraction,thr_mean,latency_mean,bp_time_total with a trailing "best,<fraction>" row.
    void write_sweep_csv(std::ostream &out, const SweepResult &sweep);
} // namespace rcsim
