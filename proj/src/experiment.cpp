#include "quantkit/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "quantkit/error.hpp"

namespace quantkit {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::set<std::string> kConfigKeys = {
    "datasets", "methods", "learners", "losses", "validation", "test", "seed", "repetitions",
    "min_count", "train_fraction", "inner_train_fraction", "emq", "hdy", "cache_dir", "jobs"};

PlanSpec parse_plan(const json& j, PlanSpec plan) {
    for (const auto& [key, _] : j.items())
        if (key != "m" && key != "q" && key != "grid" && key != "grid_step")
            throw Error("unknown plan key '" + key + "'");
    if (j.contains("m")) plan.samples_per_point = j.at("m").get<std::int64_t>();
    if (j.contains("q")) plan.sample_size = j.at("q").get<std::int64_t>();
    if (j.contains("grid") && j.contains("grid_step"))
        throw Error("plan takes either grid or grid_step, not both");
    if (j.contains("grid")) plan.grid = j.at("grid").get<std::vector<double>>();
    if (j.contains("grid_step")) {
        const double step = j.at("grid_step").get<double>();
        if (!(step > 0.0 && step <= 1.0)) throw Error("grid_step must lie in (0,1]");
        const auto n = static_cast<int>(std::lround(1.0 / step));
        if (std::abs(n * step - 1.0) > 1e-9) throw Error("grid_step must divide 1 evenly");
        plan.grid.clear();
        for (int i = 0; i <= n; ++i) plan.grid.push_back(static_cast<double>(i) / n);
    }
    return plan;
}

json plan_json(const PlanSpec& p) {
    return {{"m", p.samples_per_point}, {"q", p.sample_size}, {"grid", p.grid}};
}

SyntheticSpec parse_synthetic(const json& j, bool test_part) {
    SyntheticSpec s;
    s.size = j.value(test_part ? "test_size" : "train_size", j.value("size", s.size));
    s.prevalence = j.value("prevalence", s.prevalence);
    if (test_part) s.prevalence = j.value("test_prevalence", s.prevalence);
    const std::uint64_t seed = j.value("seed", std::uint64_t{1});
    s.seed = derive_seed(seed, {test_part ? 2u : 1u});
    s.signal = j.value("signal", s.signal);
    s.noise = j.value("noise", s.noise);
    return s;
}

// One fully specified part, as written by to_json; the seed is used as is.
SyntheticSpec parse_synthetic_part(const json& j) {
    SyntheticSpec s;
    s.size = j.at("size").get<std::size_t>();
    s.prevalence = j.at("prevalence").get<double>();
    s.seed = j.at("seed").get<std::uint64_t>();
    s.signal = j.value("signal", s.signal);
    s.noise = j.value("noise", s.noise);
    return s;
}

json synthetic_json(const SyntheticSpec& s) {
    return {{"size", s.size},     {"prevalence", s.prevalence}, {"seed", s.seed},
            {"signal", s.signal}, {"noise", s.noise}};
}

} // namespace

ExperimentConfig ExperimentConfig::from_json(const json& doc, const fs::path& base_dir) {
    if (!doc.is_object()) throw Error("config must be a JSON object");
    for (const auto& [key, _] : doc.items())
        if (!kConfigKeys.contains(key)) throw Error("unknown config key '" + key + "'");

    ExperimentConfig c;
    try {
        for (const auto& d : doc.at("datasets")) {
            DatasetSpec spec;
            spec.name = d.at("name").get<std::string>();
            if (d.contains("synthetic")) {
                spec.synthetic_train = parse_synthetic(d.at("synthetic"), false);
                spec.synthetic_test = parse_synthetic(d.at("synthetic"), true);
            } else if (d.contains("synthetic_train")) {
                spec.synthetic_train = parse_synthetic_part(d.at("synthetic_train"));
                spec.synthetic_test = parse_synthetic_part(d.at("synthetic_test"));
            } else {
                spec.train_path = base_dir / d.at("train").get<std::string>();
                spec.test_path = base_dir / d.at("test").get<std::string>();
            }
            c.datasets.push_back(std::move(spec));
        }
        for (const auto& m : doc.value("methods", std::vector<std::string>{"CC", "ACC", "PCC", "PACC",
                                                                           "EMQ", "HDy", "MLPE"}))
            c.methods.push_back(parse_method(m));
        for (const auto& l : doc.value("learners", std::vector<std::string>{"LR"}))
            c.learners.push_back(parse_learner(l));
        for (const auto& l : doc.value("losses", std::vector<std::string>{"AE"}))
            c.losses.push_back(parse_loss(l));
        if (doc.contains("validation")) c.validation = parse_plan(doc.at("validation"), c.validation);
        if (doc.contains("test")) c.test = parse_plan(doc.at("test"), c.test);
        c.seed = doc.value("seed", c.seed);
        if (doc.contains("repetitions")) {
            const auto& r = doc.at("repetitions");
            c.repetitions_case1 = r.value("case1", c.repetitions_case1);
            c.repetitions_case2 = r.value("case2", c.repetitions_case2);
        }
        c.min_count = doc.value("min_count", c.min_count);
        c.train_fraction = doc.value("train_fraction", c.train_fraction);
        c.inner_train_fraction = doc.value("inner_train_fraction", c.inner_train_fraction);
        if (doc.contains("emq")) {
            c.emq.tolerance = doc.at("emq").value("tolerance", c.emq.tolerance);
            c.emq.max_iterations = doc.at("emq").value("max_iterations", c.emq.max_iterations);
        }
        if (doc.contains("hdy")) {
            c.hdy.bin_counts = doc.at("hdy").value("bin_counts", c.hdy.bin_counts);
            c.hdy.alpha_grid_step = doc.at("hdy").value("step", c.hdy.alpha_grid_step);
        }
        if (doc.contains("cache_dir")) c.cache_dir = base_dir / doc.at("cache_dir").get<std::string>();
        c.jobs = doc.value("jobs", c.jobs);
    } catch (const json::exception& e) {
        throw Error(std::string("invalid config: ") + e.what());
    }
    c.validate();
    return c;
}

ExperimentConfig ExperimentConfig::load(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot read config " + path.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& e) {
        throw Error("invalid config " + path.string() + ": " + e.what());
    }
    return from_json(doc, path.parent_path());
}

json ExperimentConfig::to_json() const {
    json datasets_json = json::array();
    for (const auto& d : datasets) {
        json j{{"name", d.name}};
        if (d.train_path) j["train"] = d.train_path->generic_string();
        if (d.test_path) j["test"] = d.test_path->generic_string();
        if (d.synthetic_train) j["synthetic_train"] = synthetic_json(*d.synthetic_train);
        if (d.synthetic_test) j["synthetic_test"] = synthetic_json(*d.synthetic_test);
        datasets_json.push_back(j);
    }
    std::vector<std::string> m, l, s;
    for (auto x : methods) m.push_back(to_string(x));
    for (auto x : learners) l.push_back(to_string(x));
    for (auto x : losses) s.push_back(to_string(x));
    return {{"datasets", datasets_json},
            {"methods", m},
            {"learners", l},
            {"losses", s},
            {"validation", plan_json(validation)},
            {"test", plan_json(test)},
            {"seed", seed},
            {"repetitions", {{"case1", repetitions_case1}, {"case2", repetitions_case2}}},
            {"min_count", min_count},
            {"train_fraction", train_fraction},
            {"inner_train_fraction", inner_train_fraction},
            {"emq", {{"tolerance", emq.tolerance}, {"max_iterations", emq.max_iterations}}},
            {"hdy", {{"bin_counts", hdy.bin_counts}, {"step", hdy.alpha_grid_step}}}};
}

void ExperimentConfig::validate() const {
    if (datasets.empty()) throw Error("config lists no datasets");
    std::set<std::string> names;
    for (const auto& d : datasets) {
        if (d.name.empty() || d.name.find_first_of("/\\ \t,\"") != std::string::npos)
            throw Error("dataset name must be a plain identifier: '" + d.name + "'");
        if (!names.insert(d.name).second) throw Error("duplicate dataset name '" + d.name + "'");
    }
    if (methods.empty()) throw Error("config lists no methods");
    if (learners.empty()) throw Error("config lists no learners");
    if (losses.empty()) throw Error("config lists no selection losses");
    validation.make(0).validate();
    test.make(0).validate();
    if (repetitions_case1 < 1 || repetitions_case2 < 1)
        throw Error("repetition count must be at least 1");
    if (min_count < 1) throw Error("min_count must be positive");
    if (!(train_fraction > 0.0 && train_fraction < 1.0) ||
        !(inner_train_fraction > 0.0 && inner_train_fraction < 1.0))
        throw Error("split fractions must lie in (0,1)");
    emq.validate();
    hdy.validate();
    if (jobs < 1) throw Error("jobs must be at least 1");
}

std::int64_t ExperimentConfig::repetitions_for(MethodKind method) const {
    return has_estimated_parameters(method) ? repetitions_case1 : repetitions_case2;
}

std::string csv_field(const std::string& value) {
    if (value.find_first_of(",\"\r\n") == std::string::npos) return value;
    std::string out = "\"";
    for (char c : value) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + '"';
}

std::vector<std::string> parse_csv_line(const std::string& line) {
    std::vector<std::string> fields(1);
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                fields.back() += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                fields.back() += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.emplace_back();
        } else if (c != '\r') {
            fields.back() += c;
        }
    }
    if (quoted) throw Error("unterminated quoted CSV field");
    return fields;
}

void write_rows_csv(std::ostream& out, const std::vector<ResultRow>& rows) {
    out << kResultColumns << "\r\n";
    for (const auto& r : rows) {
        out << csv_field(r.method) << ',' << csv_field(r.learner) << ',' << csv_field(r.optimized_for)
            << ',' << csv_field(r.dataset) << ',' << format_double(r.grid_prevalence) << ','
            << r.sample_id << ',' << r.repetition << ',' << format_double(r.true_prevalence) << ','
            << format_double(r.estimated_prevalence) << ',' << format_double(r.ae) << ','
            << format_double(r.rae) << "\r\n";
    }
}

void write_rows_csv(const fs::path& path, const std::vector<ResultRow>& rows) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    write_rows_csv(out, rows);
    if (!out) throw Error("cannot write " + path.string());
}

std::vector<ResultRow> read_rows_csv(std::istream& in, const std::string& source) {
    std::string line;
    if (!std::getline(in, line)) throw Error("empty result file " + source);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kResultColumns) throw Error("unexpected result header in " + source);
    std::vector<ResultRow> rows;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        const auto f = parse_csv_line(line);
        if (f.size() != 11)
            throw Error(source + ":" + std::to_string(line_no) + ": expected 11 fields");
        try {
            rows.push_back({f[0], f[1], f[2], f[3], parse_double(f[4]), std::stoll(f[5]),
                            std::stoll(f[6]), parse_double(f[7]), parse_double(f[8]),
                            parse_double(f[9]), parse_double(f[10])});
        } catch (const std::exception& e) {
            throw Error(source + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return rows;
}

std::vector<ResultRow> read_rows_csv(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot read " + path.string());
    return read_rows_csv(in, path.string());
}

namespace {

std::uint64_t file_fingerprint(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot read dataset " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return stable_hash(buf.str());
}

std::string hex(std::uint64_t x) {
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << x;
    return os.str();
}

std::uint64_t synthetic_fingerprint(const SyntheticSpec& s) {
    return stable_hash(synthetic_json(s).dump());
}

} // namespace

PreparedDataset load_prepared_dataset(const DatasetSpec& spec, std::int64_t min_count,
                                      const std::optional<fs::path>& cache_dir) {
    std::optional<fs::path> dir = cache_dir;
    if (!dir) {
        if (const char* env = std::getenv(kCacheDirEnv); env && *env) dir = fs::path(env);
    }

    std::uint64_t fp = derive_seed(static_cast<std::uint64_t>(min_count), {stable_hash(spec.name)});
    if (dir) {
        if (spec.synthetic_train)
            fp = derive_seed(fp, {synthetic_fingerprint(*spec.synthetic_train),
                                  synthetic_fingerprint(*spec.synthetic_test)});
        else
            fp = derive_seed(fp, {file_fingerprint(*spec.train_path), file_fingerprint(*spec.test_path)});
        const auto entry = *dir / (spec.name + "-" + hex(fp));
        if (fs::exists(entry / "meta.txt")) return load_prepared(entry);
    }

    Corpus train, test;
    if (spec.synthetic_train) {
        train = synthetic_corpus(*spec.synthetic_train, spec.name);
        test = synthetic_corpus(*spec.synthetic_test, spec.name);
    } else {
        train = load_dataset(*spec.train_path, "tsv", spec.name);
        test = load_dataset(*spec.test_path, "tsv", spec.name);
    }
    auto data = prepare_dataset(train, test, min_count);
    if (dir) {
        const auto entry = *dir / (spec.name + "-" + hex(fp));
        const auto tmp = *dir / (spec.name + "-" + hex(fp) + ".tmp");
        fs::remove_all(tmp);
        save_prepared(data, tmp);
        fs::remove_all(entry);
        fs::rename(tmp, entry);
    }
    return data;
}

std::string RunKey::stem() const {
    return dataset + "__" + to_string(method) + "__" + learner_name() + "__" + loss_name() + "__r" +
           std::to_string(repetition);
}

RepetitionSeeds repetition_seeds(std::uint64_t master, const std::string& dataset,
                                 std::int64_t repetition) {
    const auto d = stable_hash(dataset);
    const auto r = static_cast<std::uint64_t>(repetition);
    return {derive_seed(master, {d, r, 1}), derive_seed(master, {d, r, 2}),
            derive_seed(master, {d, r, 3}), derive_seed(master, {d, r, 4})};
}

std::vector<RunKey> plan_runs(const ExperimentConfig& config) {
    std::vector<RunKey> keys;
    for (const auto& d : config.datasets) {
        for (auto method : config.methods) {
            const auto reps = config.repetitions_for(method);
            if (!needs_classifier(method)) {
                for (std::int64_t r = 0; r < reps; ++r)
                    keys.push_back({d.name, method, std::nullopt, std::nullopt, r});
                continue;
            }
            for (auto learner : config.learners)
                for (auto loss : config.losses)
                    for (std::int64_t r = 0; r < reps; ++r)
                        keys.push_back({d.name, method, learner, loss, r});
        }
    }
    return keys;
}

json selection_report_json(const SelectionReport& r) {
    json configs = json::array();
    for (std::size_t i = 0; i < r.configs.size(); ++i) {
        json c{{"index", i}, {"config", r.configs[i].describe()}};
        if (std::isfinite(r.mean_losses[i]))
            c["mean_loss"] = r.mean_losses[i];
        else
            c["mean_loss"] = nullptr;
        if (!r.failures[i].empty()) c["failure"] = r.failures[i];
        c["per_sample"] = r.per_sample_losses[i];
        c["sample_fingerprint"] = hex(r.sample_fingerprints[i]);
        configs.push_back(c);
    }
    return {{"method", to_string(r.method)},
            {"loss", to_string(r.loss.kind)},
            {"direction", r.loss.minimize() ? "minimize" : "maximize"},
            {"winner", r.winner},
            {"winner_config", r.configs[r.winner].describe()},
            {"validation_seed", r.validation_seed},
            {"inner_split_seed", r.inner_split_seed},
            {"split",
             {{"train_documents", r.train_documents},
              {"validation_documents", r.validation_documents},
              {"inner_train_fraction", r.inner_train_fraction},
              {"validation_samples", r.validation_samples}}},
            {"configs", configs}};
}

namespace {

struct OuterParts {
    SparseMatrix train_X, val_X;
    Labels train_y, val_y;
};

OuterParts outer_split(const PreparedDataset& data, double fraction, std::uint64_t seed) {
    const auto split = stratified_split(data.train_y, fraction, seed);
    OuterParts parts{data.train_X.select_rows(split.train.indices),
                     data.train_X.select_rows(split.holdout.indices), {}, {}};
    for (auto i : split.train.indices) parts.train_y.push_back(data.train_y[i]);
    for (auto i : split.holdout.indices) parts.val_y.push_back(data.train_y[i]);
    return parts;
}

struct UnitResult {
    std::vector<ResultRow> rows;
    std::optional<SelectionReport> report;
};

std::pair<QuantifierModel, std::optional<SelectionReport>>
fit_unit(const ExperimentConfig& config, const PreparedDataset& data, const RunKey& key) {
    const auto seeds = repetition_seeds(config.seed, key.dataset, key.repetition);
    const auto parts = outer_split(data, config.train_fraction, seeds.outer_split);
    const FitOptions fit{config.inner_train_fraction, seeds.inner_split, config.emq, config.hdy};
    if (!needs_classifier(key.method)) {
        return {QuantifierModel::fit(key.method, parts.train_X, parts.train_y,
                                     LearnerConfig::logistic(1.0), fit),
                std::nullopt};
    }
    auto result = select(key.method, grid_for(*key.learner), parts.train_X, parts.train_y, parts.val_X,
                         parts.val_y, config.validation.make(seeds.validation),
                         SelectionLoss{*key.loss}, SelectOptions{fit, 1});
    return {std::move(result.model), std::move(result.report)};
}

UnitResult run_unit(const ExperimentConfig& config, const PreparedDataset& data, const RunKey& key) {
    auto [model, report] = fit_unit(config, data, key);
    const auto seeds = repetition_seeds(config.seed, key.dataset, key.repetition);
    const auto samples =
        label_samples(protocol_samples(data.test_y, config.test.make(seeds.test)), data.test_y);
    const auto outputs = model.outputs(data.test_X);

    UnitResult unit{{}, std::move(report)};
    unit.rows.reserve(samples.size());
    for (const auto& s : samples) {
        const auto estimate = model.quantify(outputs, s.sample.indices);
        unit.rows.push_back(
            {to_string(key.method), key.learner_name(), key.loss_name(), key.dataset,
             s.grid_prevalence, static_cast<std::int64_t>(s.sample_id), key.repetition,
             s.true_prevalence.pos(), estimate.pos(), absolute_error(s.true_prevalence, estimate),
             relative_absolute_error(s.true_prevalence, estimate,
                                     static_cast<std::int64_t>(s.sample.indices.size()))});
    }
    return unit;
}

void write_atomically(const fs::path& path, const std::string& content) {
    const auto tmp = fs::path(path.string() + ".tmp");
    {
        std::ofstream out(tmp, std::ios::binary);
        out << content;
        if (!out) throw Error("cannot write " + tmp.string());
    }
    fs::rename(tmp, path);
}

std::map<std::string, PreparedDataset> prepare_all(const ExperimentConfig& config, std::ostream* log) {
    std::map<std::string, PreparedDataset> out;
    for (const auto& d : config.datasets) {
        if (log) *log << "preparing " << d.name << '\n';
        out.emplace(d.name, load_prepared_dataset(d, config.min_count, config.cache_dir));
    }
    return out;
}

template <typename Fn>
void for_each_parallel(std::size_t n, int jobs, Fn fn) {
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < n; i = next++) fn(i);
    };
    if (jobs <= 1 || n < 2) {
        worker();
        return;
    }
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < std::min<std::size_t>(static_cast<std::size_t>(jobs), n); ++t)
        pool.emplace_back(worker);
}

void ensure_directory(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw Error("cannot create directory " + dir.string());
}

} // namespace

RunResult run_protocol(const ExperimentConfig& config, const RunOptions& options) {
    config.validate();
    ensure_directory(options.out_dir / "parts");
    ensure_directory(options.out_dir / "selection");

    const auto keys = plan_runs(config);
    {
        json seeds = json::array();
        for (const auto& d : config.datasets) {
            std::int64_t reps = 1;
            for (auto m : config.methods) reps = std::max(reps, config.repetitions_for(m));
            for (std::int64_t r = 0; r < reps; ++r) {
                const auto s = repetition_seeds(config.seed, d.name, r);
                seeds.push_back({{"dataset", d.name}, {"repetition", r}, {"outer_split", s.outer_split},
                                 {"inner_split", s.inner_split}, {"validation", s.validation},
                                 {"test", s.test}});
            }
        }
        json manifest{{"generator", std::string(kGeneratorName)},
                      {"config", config.to_json()},
                      {"units", keys.size()},
                      {"seeds", seeds}};
        write_atomically(options.out_dir / "run.json", manifest.dump(2) + "\n");
    }

    const auto data = prepare_all(config, options.log);
    std::vector<std::vector<ResultRow>> unit_rows(keys.size());
    std::vector<std::optional<std::string>> unit_failures(keys.size());
    std::atomic<std::size_t> resumed{0};
    std::mutex writer;

    for_each_parallel(keys.size(), std::max(options.jobs, 1), [&](std::size_t i) {
        const auto& key = keys[i];
        const auto part = options.out_dir / "parts" / (key.stem() + ".csv");
        try {
            if (fs::exists(part)) {
                unit_rows[i] = read_rows_csv(part);
                ++resumed;
                return;
            }
            auto unit = run_unit(config, data.at(key.dataset), key);
            std::ostringstream csv;
            write_rows_csv(csv, unit.rows);
            std::lock_guard lock(writer);
            if (unit.report)
                write_atomically(options.out_dir / "selection" / (key.stem() + ".json"),
                                 selection_report_json(*unit.report).dump(2) + "\n");
            write_atomically(part, csv.str());
            if (options.log) *options.log << "done " << key.stem() << '\n';
            unit_rows[i] = std::move(unit.rows);
        } catch (const std::exception& e) {
            std::lock_guard lock(writer);
            if (options.log) *options.log << "FAILED " << key.stem() << ": " << e.what() << '\n';
            unit_failures[i] = e.what();
        }
    });

    RunResult result;
    result.resumed = resumed;
    for (std::size_t i = 0; i < keys.size(); ++i) {
        if (unit_failures[i]) result.failures.push_back({keys[i].stem(), *unit_failures[i]});
        result.rows.insert(result.rows.end(), unit_rows[i].begin(), unit_rows[i].end());
    }

    const auto failures_path = options.out_dir / "failures.csv";
    if (!result.failures.empty()) {
        std::ostringstream out;
        out << "unit,message\r\n";
        for (const auto& f : result.failures) out << csv_field(f.key) << ',' << csv_field(f.message) << "\r\n";
        write_atomically(failures_path, out.str());
    } else {
        fs::remove(failures_path);
    }
    if (!result.rows.empty()) report(result.rows, options.out_dir);
    return result;
}

std::vector<RunFailure> run_selection_only(const ExperimentConfig& config, const RunOptions& options) {
    config.validate();
    ensure_directory(options.out_dir / "selection");
    const auto data = prepare_all(config, options.log);
    std::vector<RunKey> keys;
    for (const auto& key : plan_runs(config))
        if (key.repetition == 0 && needs_classifier(key.method)) keys.push_back(key);

    std::vector<std::optional<std::string>> failures(keys.size());
    std::mutex writer;
    for_each_parallel(keys.size(), std::max(options.jobs, 1), [&](std::size_t i) {
        try {
            auto [model, report] = fit_unit(config, data.at(keys[i].dataset), keys[i]);
            std::lock_guard lock(writer);
            write_atomically(options.out_dir / "selection" / (keys[i].stem() + ".json"),
                             selection_report_json(*report).dump(2) + "\n");
            if (options.log)
                *options.log << keys[i].stem() << ": winner " << report->configs[report->winner].describe()
                             << " mean " << to_string(report->loss.kind) << " "
                             << format_double(report->mean_losses[report->winner]) << '\n';
        } catch (const std::exception& e) {
            failures[i] = e.what();
        }
    });
    std::vector<RunFailure> out;
    for (std::size_t i = 0; i < keys.size(); ++i)
        if (failures[i]) out.push_back({keys[i].stem(), *failures[i]});
    return out;
}

void run_prepare(const ExperimentConfig& config, const fs::path& out_dir) {
    config.validate();
    for (const auto& d : config.datasets) {
        const auto data = load_prepared_dataset(d, config.min_count, config.cache_dir);
        const auto dir = out_dir / "prepared" / d.name;
        save_prepared(data, dir);
        const auto seeds = repetition_seeds(config.seed, d.name, 0);
        const auto split = stratified_split(data.train_y, config.train_fraction, seeds.outer_split);
        std::ostringstream out;
        out << "row,part\n";
        std::vector<char> part(data.train_y.size(), 'v');
        for (auto i : split.train.indices) part[i] = 't';
        for (std::size_t i = 0; i < part.size(); ++i)
            out << i << ',' << (part[i] == 't' ? "train" : "validation") << '\n';
        write_atomically(dir / "split_r0.csv", out.str());
    }
}

std::vector<SummaryRow> summarize(const std::vector<ResultRow>& rows) {
    using Group = std::tuple<std::string, std::string, std::string, std::string>;
    struct Acc {
        double ae = 0, rae = 0;
        std::int64_t n = 0;
    };
    std::map<Group, std::map<std::int64_t, Acc>> groups;
    for (const auto& r : rows) {
        auto& a = groups[{r.dataset, r.method, r.learner, r.optimized_for}][r.repetition];
        a.ae += r.ae;
        a.rae += r.rae;
        ++a.n;
    }
    std::vector<SummaryRow> out;
    for (const auto& [g, reps] : groups) {
        SummaryRow s{std::get<0>(g), std::get<1>(g), std::get<2>(g), std::get<3>(g)};
        for (const auto& [rep, a] : reps) {
            s.mean_ae += a.ae / static_cast<double>(a.n);
            s.mean_rae += a.rae / static_cast<double>(a.n);
            s.samples += a.n;
        }
        s.repetitions = static_cast<std::int64_t>(reps.size());
        s.mean_ae /= static_cast<double>(reps.size());
        s.mean_rae /= static_cast<double>(reps.size());
        out.push_back(std::move(s));
    }
    return out;
}

namespace {

using PairKey = std::tuple<std::string, std::string, std::int64_t, double, std::int64_t>;

PairKey pair_key(const ResultRow& r, bool match_learner) {
    return {r.dataset, match_learner ? r.learner : std::string(), r.repetition, r.grid_prevalence,
            r.sample_id};
}

double metric_of(const ResultRow& r, const std::string& metric) {
    if (metric == "ae") return r.ae;
    if (metric == "rae") return r.rae;
    throw Error("unknown metric '" + metric + "'");
}

int loss_rank(const std::string& loss) {
    static const std::vector<std::string> order{"AE", "RAE", "A", "F1"};
    const auto it = std::find(order.begin(), order.end(), loss);
    return it == order.end() ? 99 : static_cast<int>(it - order.begin());
}

} // namespace

TTestRow compare_rows(const std::vector<ResultRow>& a, const std::vector<ResultRow>& b,
                      const std::string& metric, bool match_learner) {
    std::map<PairKey, double> left;
    for (const auto& r : a)
        if (!left.emplace(pair_key(r, match_learner), metric_of(r, metric)).second)
            throw Error("first row set has duplicate pairing keys");
    std::vector<double> xs, ys;
    std::set<PairKey> seen;
    for (const auto& r : b) {
        const auto k = pair_key(r, match_learner);
        if (!seen.insert(k).second) throw Error("second row set has duplicate pairing keys");
        if (const auto it = left.find(k); it != left.end()) {
            xs.push_back(it->second);
            ys.push_back(metric_of(r, metric));
        }
    }
    TTestRow row;
    row.metric = metric;
    row.pairs = xs.size();
    row.verdict = paired_ttest(xs, ys);
    return row;
}

std::vector<TTestRow> loss_comparisons(const std::vector<ResultRow>& rows) {
    std::map<std::string, std::map<std::string, std::vector<ResultRow>>> by_method;
    for (const auto& r : rows)
        if (r.optimized_for != "-") by_method[r.method][r.optimized_for].push_back(r);

    std::vector<TTestRow> out;
    for (const auto& [method, by_loss] : by_method) {
        std::vector<std::string> losses;
        for (const auto& [loss, _] : by_loss) losses.push_back(loss);
        std::sort(losses.begin(), losses.end(), [](const auto& x, const auto& y) {
            return std::pair(loss_rank(x), x) < std::pair(loss_rank(y), y);
        });
        for (std::size_t i = 0; i < losses.size(); ++i) {
            for (std::size_t j = i + 1; j < losses.size(); ++j) {
                for (const std::string metric : {"ae", "rae"}) {
                    try {
                        auto row = compare_rows(by_loss.at(losses[i]), by_loss.at(losses[j]), metric);
                        row.method = method;
                        row.first = losses[i];
                        row.second = losses[j];
                        out.push_back(std::move(row));
                    } catch (const Error&) {
                        // fewer than two pairs: nothing to test
                    }
                }
            }
        }
    }
    return out;
}

namespace {

std::size_t display_width(const std::string& s) {
    std::size_t n = 0;
    for (unsigned char c : s) n += (c & 0xC0) != 0x80;
    return n;
}

std::string fixed3(double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3f", x);
    return buf;
}

std::string text_table(const std::vector<std::string>& header,
                       const std::vector<std::vector<std::string>>& body) {
    std::vector<std::size_t> width(header.size());
    for (std::size_t c = 0; c < header.size(); ++c) width[c] = display_width(header[c]);
    for (const auto& row : body)
        for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], display_width(row[c]));
    std::ostringstream out;
    auto emit = [&](const std::vector<std::string>& row) {
        for (std::size_t c = 0; c < row.size(); ++c) {
            if (c) out << "  ";
            out << row[c] << std::string(width[c] - display_width(row[c]), ' ');
        }
        out << '\n';
    };
    emit(header);
    std::size_t total = 0;
    for (auto w : width) total += w;
    out << std::string(total + 2 * (width.size() - 1), '-') << '\n';
    for (const auto& row : body) emit(row);
    return out.str();
}

} // namespace

void report(const std::vector<ResultRow>& rows, const fs::path& out_dir) {
    if (rows.empty()) throw Error("no result rows to report");
    ensure_directory(out_dir);

    std::ostringstream raw;
    write_rows_csv(raw, rows);
    write_atomically(out_dir / "raw.csv", raw.str());

    const auto summary = summarize(rows);
    std::ostringstream csv;
    csv << "dataset,method,learner,optimized_for,repetitions,samples,mean_ae,mean_rae\r\n";
    std::vector<std::vector<std::string>> body;
    for (const auto& s : summary) {
        csv << csv_field(s.dataset) << ',' << csv_field(s.method) << ',' << csv_field(s.learner) << ','
            << csv_field(s.optimized_for) << ',' << s.repetitions << ',' << s.samples << ','
            << format_double(s.mean_ae) << ',' << format_double(s.mean_rae) << "\r\n";
        body.push_back({s.dataset, s.method, s.learner, s.optimized_for, std::to_string(s.repetitions),
                        std::to_string(s.samples), fixed3(s.mean_ae), fixed3(s.mean_rae)});
    }
    write_atomically(out_dir / "summary.csv", csv.str());
    write_atomically(out_dir / "summary.txt",
                     text_table({"dataset", "method", "learner", "optimized for", "reps", "samples",
                                 "AE", "RAE"},
                                body));

    const auto tests = loss_comparisons(rows);
    std::ostringstream tcsv;
    tcsv << "method,metric,first,second,pairs,t,df,p_value,symbol,degenerate\r\n";
    body.clear();
    for (const auto& t : tests) {
        tcsv << csv_field(t.method) << ',' << t.metric << ',' << csv_field(t.first) << ','
             << csv_field(t.second) << ',' << t.pairs << ',' << format_double(t.verdict.t) << ','
             << format_double(t.verdict.df) << ',' << format_double(t.verdict.p_value) << ','
             << t.verdict.symbol << ',' << (t.verdict.degenerate ? "true" : "false") << "\r\n";
        body.push_back({t.first + " vs " + t.second, t.method, t.metric, std::to_string(t.pairs),
                        fixed3(t.verdict.t), fixed3(t.verdict.p_value), t.verdict.symbol});
    }
    write_atomically(out_dir / "ttest.csv", tcsv.str());
    write_atomically(out_dir / "ttest.txt",
                     text_table({"comparison", "method", "metric", "pairs", "t", "p", "verdict"}, body));
}

} // namespace quantkit
