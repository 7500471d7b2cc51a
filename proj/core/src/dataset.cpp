#include "fdialab/dataset.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <optional>
#include <sstream>
#include <thread>

#include "json.hpp"

namespace fdialab {

using nlohmann::json;

static_assert(std::endian::native == std::endian::little,
              "dataset binary formats are little-endian");

LoadProfile synth_load_profile(int days, std::uint64_t rng_seed, const SynthProfileOptions& opt) {
    if (days <= 0) throw ContractError("synth_load_profile: days must be positive");
    constexpr int kMinutesPerDay = 1440;

    // double-peak daily shape, normalized to [0,1] over the minute grid
    auto shape = [](double tau) {
        return std::sin(2.0 * std::numbers::pi * tau - 2.2) +
               0.45 * std::sin(4.0 * std::numbers::pi * tau - 1.0);
    };
    double smin = 1e300, smax = -1e300;
    for (int m = 0; m < kMinutesPerDay; ++m) {
        const double s = shape(static_cast<double>(m) / kMinutesPerDay);
        smin = std::min(smin, s);
        smax = std::max(smax, s);
    }

    Rng rng(rng_seed);
    LoadProfile profile;
    profile.values.resize(static_cast<std::size_t>(days) * kMinutesPerDay);
    const double innovation =
        opt.ar_sigma * std::sqrt(std::max(0.0, 1.0 - opt.ar_rho * opt.ar_rho));
    double ar = opt.ar_sigma > 0.0 ? rng.gaussian(0.0, opt.ar_sigma) : 0.0;
    for (std::size_t i = 0; i < profile.values.size(); ++i) {
        const int m = static_cast<int>(i % kMinutesPerDay);
        const double s = (shape(static_cast<double>(m) / kMinutesPerDay) - smin) / (smax - smin);
        const double base = opt.low + (opt.high - opt.low) * s;
        if (opt.ar_sigma > 0.0) {
            ar = opt.ar_rho * ar + rng.gaussian(0.0, innovation);
        }
        profile.values[i] = std::max(base + ar, 0.05);
    }
    return profile;
}

namespace {

/// Accepts plain minute offsets, epoch seconds, or ISO-style timestamps.
double parse_timestamp_minutes(const std::string& tok, int line_no) {
    if (tok.find('-') != std::string::npos || tok.find(':') != std::string::npos) {
        // YYYY-MM-DD[ T]HH:MM[:SS]; date handled as day offsets, which is all
        // interpolation needs
        int y = 0, mo = 0, d = 0, h = 0, mi = 0, s = 0;
        const int got = std::sscanf(tok.c_str(), "%d-%d-%d%*1[T ]%d:%d:%d", &y, &mo, &d, &h, &mi, &s);
        if (got < 5) {
            throw ParseError("load csv line " + std::to_string(line_no) + ": bad timestamp '" +
                             tok + "'");
        }
        // months flattened at 31 days; fine for intra-month windows
        const double days = static_cast<double>(y) * 372.0 + static_cast<double>(mo) * 31.0 +
                            static_cast<double>(d);
        return days * 1440.0 + h * 60.0 + mi + s / 60.0;
    }
    try {
        std::size_t used = 0;
        double v = std::stod(tok, &used);
        if (used != tok.size()) throw std::invalid_argument(tok);
        if (v > 1e6) v /= 60.0;  // epoch seconds
        return v;
    } catch (const std::exception&) {
        throw ParseError("load csv line " + std::to_string(line_no) + ": bad timestamp '" + tok +
                         "'");
    }
}

}  // namespace

LoadProfile ingest_load_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    std::vector<double> minutes;
    std::vector<double> loads;
    while (std::getline(in, line)) {
        ++line_no;
        while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) line.pop_back();
        if (line.empty()) continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos) {
            throw ParseError("load csv line " + std::to_string(line_no) + ": expected two columns");
        }
        const std::string ts = line.substr(0, comma);
        const std::string val = line.substr(comma + 1);
        if (line_no == 1 && ts.find_first_of("0123456789") == std::string::npos) {
            continue;  // header row
        }
        double load = 0.0;
        try {
            load = std::stod(val);
        } catch (const std::exception&) {
            throw ParseError("load csv line " + std::to_string(line_no) + ": bad load '" + val +
                             "'");
        }
        if (!(load > 0.0)) {
            throw ParseError("load csv line " + std::to_string(line_no) + ": load must be > 0");
        }
        const double m = parse_timestamp_minutes(ts, line_no);
        if (!minutes.empty()) {
            if (m <= minutes.back()) {
                throw ParseError("load csv line " + std::to_string(line_no) +
                                 ": non-monotonic timestamp");
            }
            if (m - minutes.back() > 60.0) {
                throw ParseError("load csv line " + std::to_string(line_no) +
                                 ": gap exceeds 60 minutes");
            }
        }
        minutes.push_back(m);
        loads.push_back(load);
    }
    if (minutes.size() < 2) throw ParseError("load csv: need at least two data rows");

    // 1-minute linear interpolation over [first, last], normalized by the mean
    LoadProfile profile;
    const double t0 = minutes.front();
    const auto steps = static_cast<std::size_t>(std::floor(minutes.back() - t0)) + 1;
    profile.values.resize(steps);
    std::size_t seg = 0;
    double sum = 0.0;
    for (std::size_t k = 0; k < steps; ++k) {
        const double t = t0 + static_cast<double>(k);
        while (seg + 2 < minutes.size() && minutes[seg + 1] < t) ++seg;
        const double span = minutes[seg + 1] - minutes[seg];
        const double w = (t - minutes[seg]) / span;
        profile.values[k] = loads[seg] + w * (loads[seg + 1] - loads[seg]);
        sum += profile.values[k];
    }
    const double mean = sum / static_cast<double>(steps);
    for (auto& v : profile.values) v /= mean;
    return profile;
}

ScenarioSet generate_scenarios(const GridCase& grid, const LoadProfile& profile,
                               std::size_t count, std::uint64_t rng_seed,
                               const ScenarioOptions& opt) {
    if (count == 0) throw ContractError("generate_scenarios: count must be positive");
    if (profile.values.size() < count) {
        throw ContractError("generate_scenarios: profile shorter than requested count");
    }
    const std::size_t n = grid.n();
    const Rng master(rng_seed);

    // every timestamp is independent given its fork of the master seed, so
    // the result is slot-ordered and identical for any job count
    std::vector<std::optional<Scenario>> slots(count);
    auto worker = [&](std::size_t begin, std::size_t end) {
        for (std::size_t ts = begin; ts < end; ++ts) {
            Rng rng = master.fork(ts);
            const double factor = profile.values[ts];
            Loading loading = Loading::uniform(n, factor);
            for (std::size_t i = 0; i < n; ++i) {
                const double jitter = rng.uniform(opt.jitter_low, opt.jitter_high);
                loading.p_scale[i] *= jitter;
                loading.q_scale[i] *= jitter;
            }
            Scenario sc;
            try {
                sc.state = solve_power_flow(grid, loading);
            } catch (const NumericalError&) {
                continue;  // slot stays empty and counts as skipped
            }
            const MeasurementFrame clean = measurement_function(grid, sc.state);
            sc.frame = add_noise(clean, opt.noise_sigma_rel, rng.next_u64(), opt.noise_floor);
            sc.frame.timestamp = static_cast<std::int64_t>(ts);
            slots[ts] = std::move(sc);
        }
    };

    const int jobs = std::max(1, opt.jobs);
    if (jobs == 1 || count < 64) {
        worker(0, count);
    } else {
        std::vector<std::thread> pool;
        const std::size_t chunk = (count + jobs - 1) / static_cast<std::size_t>(jobs);
        for (int j = 0; j < jobs; ++j) {
            const std::size_t begin = static_cast<std::size_t>(j) * chunk;
            const std::size_t end = std::min(count, begin + chunk);
            if (begin >= end) break;
            pool.emplace_back(worker, begin, end);
        }
        for (auto& t : pool) t.join();
    }

    ScenarioSet out;
    out.attempted = count;
    out.scenarios.reserve(count);
    for (auto& slot : slots) {
        if (slot.has_value()) {
            out.scenarios.push_back(std::move(*slot));
        } else {
            ++out.skipped;
        }
    }
    if (static_cast<double>(out.skipped) >
        opt.max_skip_fraction * static_cast<double>(out.attempted)) {
        throw NumericalError("scenario generation skipped " + std::to_string(out.skipped) + " of " +
                             std::to_string(out.attempted) + " timestamps");
    }
    return out;
}

std::string to_string(AttackKind k) {
    switch (k) {
        case AttackKind::None: return "none";
        case AttackKind::Stealth: return "A_o";
        case AttackKind::Replay: return "A_r";
        case AttackKind::Distribution: return "A_d";
        case AttackKind::Scale: return "A_s";
    }
    return "none";
}

AttackKind attack_kind_from_string(const std::string& s) {
    if (s == "none") return AttackKind::None;
    if (s == "A_o") return AttackKind::Stealth;
    if (s == "A_r") return AttackKind::Replay;
    if (s == "A_d") return AttackKind::Distribution;
    if (s == "A_s") return AttackKind::Scale;
    throw ParseError("unknown attack kind: " + s);
}

Mat Standardizer::apply(const Mat& features) const {
    if (features.rows() != mean.rows() || features.cols() != mean.cols()) {
        throw ContractError("Standardizer::apply: shape mismatch");
    }
    Mat out = features;
    for (std::size_t i = 0; i < out.rows(); ++i) {
        for (std::size_t j = 0; j < out.cols(); ++j) {
            out(i, j) = (out(i, j) - mean(i, j)) / stddev(i, j);
        }
    }
    return out;
}

namespace {

Mat frame_features(const MeasurementFrame& frame) {
    const std::size_t n = frame.p_inj.size();
    Mat x(n, 2);
    for (std::size_t i = 0; i < n; ++i) {
        x(i, 0) = frame.p_inj[i];
        x(i, 1) = frame.q_inj[i];
    }
    return x;
}

struct PlannedSample {
    std::size_t scenario_idx = 0;
    AttackKind kind = AttackKind::None;
};

}  // namespace

DatasetSplits assemble_dataset(const GridCase& grid, const ScenarioSet& scenarios,
                               const AttackMixConfig& config, std::uint64_t rng_seed) {
    const std::size_t f = scenarios.scenarios.size();
    const std::size_t n = grid.n();
    if (f < 12) throw ModelError("assemble_dataset: need at least 12 frames, got " +
                                 std::to_string(f));
    const Rng master(rng_seed);

    std::vector<std::size_t> order(f);
    for (std::size_t i = 0; i < f; ++i) order[i] = i;
    {
        Rng shuffle_rng = master.fork(0xA11CE);
        shuffle_rng.shuffle(order);
    }

    const std::size_t val_n = f / 6;
    const std::size_t test_n = f / 6;
    const std::size_t train_n = f - val_n - test_n;

    struct SplitPlan {
        std::vector<PlannedSample> samples;
        const std::vector<AttackKind>* kinds;
    };
    SplitPlan plans[3];
    plans[0].kinds = &config.train_kinds;
    plans[1].kinds = &config.train_kinds;
    plans[2].kinds = &config.test_kinds;
    const std::size_t bounds[4] = {0, train_n, train_n + val_n, f};
    for (int s = 0; s < 3; ++s) {
        for (std::size_t k = bounds[s]; k < bounds[s + 1]; ++k) {
            plans[s].samples.push_back({order[k], AttackKind::None});
        }
        // the order is already shuffled, so attacking the first half of the
        // split keeps the 50/50 balance unbiased
        const std::size_t attacked = plans[s].samples.size() / 2;
        const auto& kinds = *plans[s].kinds;
        if (kinds.empty()) throw ConfigError("assemble_dataset: empty attack kind list");
        for (std::size_t k = 0; k < attacked; ++k) {
            plans[s].samples[k].kind = kinds[k % kinds.size()];
        }
        // replay needs history: swap kinds away from too-early frames
        for (std::size_t k = 0; k < attacked; ++k) {
            auto& sample = plans[s].samples[k];
            if (sample.kind != AttackKind::Replay) continue;
            const std::size_t t = sample.scenario_idx;
            if (t >= config.replay_min_lag) continue;
            bool swapped = false;
            for (std::size_t j = 0; j < attacked; ++j) {
                auto& other = plans[s].samples[j];
                if (other.kind != AttackKind::Replay &&
                    other.scenario_idx >= config.replay_min_lag) {
                    std::swap(sample.kind, other.kind);
                    swapped = true;
                    break;
                }
            }
            if (!swapped && t == 0) {
                throw ModelError("assemble_dataset: cannot place a replay attack (no history)");
            }
        }
    }

    // attacker-observable history: the chronological clean frames, stats from
    // the training-period prefix
    std::vector<MeasurementFrame> history;
    history.reserve(f);
    for (const auto& sc : scenarios.scenarios) history.push_back(sc.frame);
    std::vector<MeasurementFrame> stats_window(history.begin(),
                                               history.begin() +
                                                   static_cast<std::ptrdiff_t>(2 * f / 3));
    const MeasurementStats stats = measurement_stats(stats_window);

    const std::size_t area_max =
        config.area_size_max > 0
            ? config.area_size_max
            : static_cast<std::size_t>(std::ceil(static_cast<double>(n) / 5.0));
    const SizeRange area_range{config.area_size_min, std::min(area_max, n - 1)};

    DatasetSplits splits;
    splits.n = n;
    std::vector<LabeledSample>* lists[3] = {&splits.train, &splits.validation, &splits.test};
    StealthOptions stealth_opt;
    stealth_opt.magnitude = config.stealth_magnitude;

    for (int s = 0; s < 3; ++s) {
        for (const auto& planned : plans[s].samples) {
            const Scenario& sc = scenarios.scenarios[planned.scenario_idx];
            Rng rng = master.fork(0xF00D0000ULL + planned.scenario_idx);
            LabeledSample sample;
            sample.kind = planned.kind;
            sample.raw_frame_ref = planned.scenario_idx;
            if (planned.kind == AttackKind::None) {
                sample.x = frame_features(sc.frame);
                sample.y.per_bus.assign(n, 0);
                sample.y.grid = 0;
            } else {
                const TargetArea area = sample_target_area(grid, area_range, rng);
                AttackedFrame attacked;
                switch (planned.kind) {
                    case AttackKind::Stealth:
                        attacked = attack_stealth(grid, sc.frame, sc.state, area, rng, stealth_opt);
                        break;
                    case AttackKind::Replay: {
                        const std::size_t t = planned.scenario_idx;
                        const std::size_t lo = std::min(config.replay_min_lag, t);
                        const std::size_t hi = std::min(config.replay_max_lag, t);
                        const std::size_t tau = lo + rng.uniform_index(hi - lo + 1);
                        attacked = attack_replay(history, t, tau, area);
                        break;
                    }
                    case AttackKind::Distribution:
                        attacked = attack_distribution(stats, sc.frame, area, rng);
                        break;
                    case AttackKind::Scale:
                        attacked = attack_scale(sc.frame, area, rng);
                        break;
                    case AttackKind::None: break;
                }
                sample.x = frame_features(attacked.frame);
                sample.y = attacked.label;
            }
            lists[s]->push_back(std::move(sample));
        }
    }

    // standardizer from train-split features only
    Standardizer& std_out = splits.standardizer;
    std_out.mean = Mat(n, 2);
    std_out.stddev = Mat(n, 2);
    const double count = static_cast<double>(splits.train.size());
    for (const auto& sample : splits.train) std_out.mean += sample.x;
    std_out.mean *= 1.0 / count;
    for (const auto& sample : splits.train) {
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < 2; ++j) {
                const double d = sample.x(i, j) - std_out.mean(i, j);
                std_out.stddev(i, j) += d * d;
            }
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < 2; ++j) {
            std_out.stddev(i, j) = std::max(std::sqrt(std_out.stddev(i, j) / count), 1e-8);
        }
    }
    for (auto* list : lists) {
        for (auto& sample : *list) sample.x = std_out.apply(sample.x);
    }
    return splits;
}

namespace {

constexpr char kFeatureMagic[4] = {'F', 'D', 'L', 'X'};
constexpr char kLabelMagic[4] = {'F', 'D', 'L', 'Y'};
constexpr std::uint32_t kFormatVersion = 1;

template <typename T>
void write_pod(std::ofstream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& in, const std::string& what) {
    T v{};
    if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) {
        throw ParseError("dataset file truncated while reading " + what);
    }
    return v;
}

void write_split_features(const std::string& path, const std::vector<LabeledSample>& samples,
                          std::size_t n) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ParseError("cannot write " + path);
    out.write(kFeatureMagic, 4);
    write_pod(out, kFormatVersion);
    write_pod(out, static_cast<std::uint32_t>(n));
    write_pod(out, static_cast<std::uint32_t>(2));
    write_pod(out, static_cast<std::uint64_t>(samples.size()));
    for (const auto& sample : samples) {
        out.write(reinterpret_cast<const char*>(sample.x.data()),
                  static_cast<std::streamsize>(sample.x.size() * sizeof(double)));
    }
}

void write_split_labels(const std::string& path, const std::vector<LabeledSample>& samples,
                        std::size_t n) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ParseError("cannot write " + path);
    out.write(kLabelMagic, 4);
    write_pod(out, kFormatVersion);
    write_pod(out, static_cast<std::uint32_t>(n + 1));
    write_pod(out, static_cast<std::uint64_t>(samples.size()));
    const std::size_t bytes_per = (n + 1 + 7) / 8;
    std::vector<std::uint8_t> packed(bytes_per);
    for (const auto& sample : samples) {
        std::fill(packed.begin(), packed.end(), 0);
        for (std::size_t i = 0; i < n; ++i) {
            if (sample.y.per_bus[i]) packed[i / 8] |= static_cast<std::uint8_t>(1u << (i % 8));
        }
        if (sample.y.grid) packed[n / 8] |= static_cast<std::uint8_t>(1u << (n % 8));
        out.write(reinterpret_cast<const char*>(packed.data()),
                  static_cast<std::streamsize>(packed.size()));
    }
}

void read_split(const std::string& dir, const std::string& name, std::size_t n,
                std::vector<LabeledSample>& out) {
    std::ifstream fin(dir + "/" + name + ".bin", std::ios::binary);
    if (!fin) throw ParseError("cannot open " + dir + "/" + name + ".bin");
    char magic[4];
    fin.read(magic, 4);
    if (std::memcmp(magic, kFeatureMagic, 4) != 0) throw ParseError("bad feature file magic");
    if (read_pod<std::uint32_t>(fin, "version") != kFormatVersion) {
        throw ParseError("unsupported feature file version");
    }
    const auto file_n = read_pod<std::uint32_t>(fin, "n");
    const auto features = read_pod<std::uint32_t>(fin, "features");
    const auto count = read_pod<std::uint64_t>(fin, "sample count");
    if (file_n != n || features != 2) throw ParseError("feature file shape mismatch");

    std::ifstream lin(dir + "/" + name + ".labels.bin", std::ios::binary);
    if (!lin) throw ParseError("cannot open " + dir + "/" + name + ".labels.bin");
    lin.read(magic, 4);
    if (std::memcmp(magic, kLabelMagic, 4) != 0) throw ParseError("bad label file magic");
    if (read_pod<std::uint32_t>(lin, "version") != kFormatVersion) {
        throw ParseError("unsupported label file version");
    }
    const auto bits = read_pod<std::uint32_t>(lin, "label bits");
    const auto lcount = read_pod<std::uint64_t>(lin, "label count");
    if (bits != n + 1 || lcount != count) throw ParseError("label file shape mismatch");
    const std::size_t bytes_per = (n + 1 + 7) / 8;

    out.resize(count);
    std::vector<std::uint8_t> packed(bytes_per);
    for (auto& sample : out) {
        sample.x = Mat(n, 2);
        if (!fin.read(reinterpret_cast<char*>(sample.x.data()),
                      static_cast<std::streamsize>(sample.x.size() * sizeof(double)))) {
            throw ParseError("feature file truncated");
        }
        if (!lin.read(reinterpret_cast<char*>(packed.data()),
                      static_cast<std::streamsize>(packed.size()))) {
            throw ParseError("label file truncated");
        }
        sample.y.per_bus.assign(n, 0);
        for (std::size_t i = 0; i < n; ++i) {
            sample.y.per_bus[i] = (packed[i / 8] >> (i % 8)) & 1u;
        }
        sample.y.grid = (packed[n / 8] >> (n % 8)) & 1u;
    }
}

json standardizer_to_json(const Standardizer& s) {
    json j;
    for (std::size_t i = 0; i < s.mean.rows(); ++i) {
        j["mean"].push_back({s.mean(i, 0), s.mean(i, 1)});
        j["stddev"].push_back({s.stddev(i, 0), s.stddev(i, 1)});
    }
    return j;
}

}  // namespace

void save_dataset(const std::string& dir, const DatasetSplits& splits,
                  const std::string& case_name, std::uint64_t seed) {
    std::filesystem::create_directories(dir);
    const struct {
        const char* name;
        const std::vector<LabeledSample>* samples;
    } parts[3] = {{"train", &splits.train},
                  {"validation", &splits.validation},
                  {"test", &splits.test}};

    json meta;
    meta["schema"] = "fdialab.dataset.v1";
    meta["case"] = case_name;
    meta["seed"] = seed;
    meta["n"] = splits.n;
    meta["standardizer"] = standardizer_to_json(splits.standardizer);
    for (const auto& part : parts) {
        write_split_features(dir + "/" + part.name + ".bin", *part.samples, splits.n);
        write_split_labels(dir + "/" + part.name + ".labels.bin", *part.samples, splits.n);
        json refs = json::array(), kinds = json::array();
        for (const auto& sample : *part.samples) {
            refs.push_back(sample.raw_frame_ref);
            kinds.push_back(to_string(sample.kind));
        }
        meta["splits"][part.name] = {{"count", part.samples->size()},
                                     {"frame_refs", std::move(refs)},
                                     {"attack_kinds", std::move(kinds)}};
    }
    std::ofstream mf(dir + "/meta.json", std::ios::trunc);
    if (!mf) throw ParseError("cannot write " + dir + "/meta.json");
    mf << meta.dump(2) << "\n";
}

DatasetSplits load_dataset(const std::string& dir) {
    std::ifstream mf(dir + "/meta.json");
    if (!mf) throw ParseError("cannot open " + dir + "/meta.json");
    json meta;
    try {
        mf >> meta;
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("meta.json: ") + e.what());
    }
    DatasetSplits splits;
    splits.n = meta.at("n").get<std::size_t>();
    const auto& sj = meta.at("standardizer");
    splits.standardizer.mean = Mat(splits.n, 2);
    splits.standardizer.stddev = Mat(splits.n, 2);
    for (std::size_t i = 0; i < splits.n; ++i) {
        for (std::size_t j = 0; j < 2; ++j) {
            splits.standardizer.mean(i, j) = sj.at("mean").at(i).at(j).get<double>();
            splits.standardizer.stddev(i, j) = sj.at("stddev").at(i).at(j).get<double>();
        }
    }
    const struct {
        const char* name;
        std::vector<LabeledSample>* samples;
    } parts[3] = {{"train", &splits.train},
                  {"validation", &splits.validation},
                  {"test", &splits.test}};
    for (const auto& part : parts) {
        read_split(dir, part.name, splits.n, *part.samples);
        const auto& pj = meta.at("splits").at(part.name);
        const auto& refs = pj.at("frame_refs");
        const auto& kinds = pj.at("attack_kinds");
        if (refs.size() != part.samples->size()) throw ParseError("meta split count mismatch");
        for (std::size_t k = 0; k < part.samples->size(); ++k) {
            (*part.samples)[k].raw_frame_ref = refs.at(k).get<std::size_t>();
            (*part.samples)[k].kind = attack_kind_from_string(kinds.at(k).get<std::string>());
        }
    }
    return splits;
}

void export_dataset_csv(const std::string& dir, const DatasetSplits& splits) {
    const struct {
        const char* name;
        const std::vector<LabeledSample>* samples;
    } parts[3] = {{"train", &splits.train},
                  {"validation", &splits.validation},
                  {"test", &splits.test}};
    for (const auto& part : parts) {
        std::ofstream out(dir + "/" + std::string(part.name) + ".csv", std::ios::trunc);
        if (!out) throw ParseError("cannot write csv for split " + std::string(part.name));
        out << "sample,frame_ref,attack_kind,grid_label";
        for (std::size_t i = 0; i < splits.n; ++i) {
            out << ",p_" << i << ",q_" << i << ",label_" << i;
        }
        out << "\n";
        out.precision(17);
        for (std::size_t k = 0; k < part.samples->size(); ++k) {
            const auto& sample = (*part.samples)[k];
            out << k << "," << sample.raw_frame_ref << "," << to_string(sample.kind) << ","
                << static_cast<int>(sample.y.grid);
            for (std::size_t i = 0; i < splits.n; ++i) {
                out << "," << sample.x(i, 0) << "," << sample.x(i, 1) << ","
                    << static_cast<int>(sample.y.per_bus[i]);
            }
            out << "\n";
        }
    }
}

}  // namespace fdialab
