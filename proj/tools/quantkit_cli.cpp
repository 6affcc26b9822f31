#include <iostream>
#include <map>
#include <string>

#include <CLI11.hpp>

#include "quantkit/dataset.hpp"
#include "quantkit/error.hpp"
#include "quantkit/experiment.hpp"

namespace fs = std::filesystem;
using namespace quantkit;

namespace {

struct Common {
    std::string config;
    std::string out = "results";
    std::optional<std::uint64_t> seed;
    std::optional<int> jobs;
};

ExperimentConfig load_config(const Common& c) {
    auto config = ExperimentConfig::load(c.config);
    if (c.seed) config.seed = *c.seed;
    if (c.jobs) config.jobs = *c.jobs;
    config.validate();
    return config;
}

void add_common(CLI::App* cmd, Common& c, bool needs_config = true) {
    auto* opt = cmd->add_option("--config", c.config, "experiment config (JSON)");
    if (needs_config) opt->required()->check(CLI::ExistingFile);
    cmd->add_option("--out", c.out, "output directory");
    cmd->add_option("--seed", c.seed, "override the master seed");
    cmd->add_option("--jobs", c.jobs, "concurrent units of work")->check(CLI::PositiveNumber);
}

std::vector<ResultRow> filter_rows(std::vector<ResultRow> rows, const std::vector<std::string>& where) {
    for (const auto& clause : where) {
        const auto eq = clause.find('=');
        if (eq == std::string::npos) throw Error("filter must be column=value: " + clause);
        const auto col = clause.substr(0, eq), value = clause.substr(eq + 1);
        std::erase_if(rows, [&](const ResultRow& r) {
            if (col == "method") return r.method != value;
            if (col == "learner") return r.learner != value;
            if (col == "optimized_for") return r.optimized_for != value;
            if (col == "dataset") return r.dataset != value;
            throw Error("cannot filter on column '" + col + "'");
        });
    }
    return rows;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"quantkit: class-prevalence estimation experiments"};
    app.require_subcommand(1);

    Common prepare_opts, select_opts, protocol_opts;
    auto* prepare = app.add_subcommand("prepare", "split, vectorise and cache every dataset");
    add_common(prepare, prepare_opts);
    auto* sel = app.add_subcommand("select", "run model selection only");
    add_common(sel, select_opts);
    auto* protocol = app.add_subcommand("protocol", "full selection + test protocol run");
    add_common(protocol, protocol_opts);

    std::string file_a, file_b, metric = "ae", out_file;
    std::vector<std::string> where_a, where_b;
    bool any_learner = false;
    auto* ttest = app.add_subcommand("ttest", "paired t-test between two result files");
    ttest->add_option("--a", file_a, "first raw result CSV")->required()->check(CLI::ExistingFile);
    ttest->add_option("--b", file_b, "second raw result CSV")->required()->check(CLI::ExistingFile);
    ttest->add_option("--metric", metric, "ae or rae")->check(CLI::IsMember({"ae", "rae"}));
    ttest->add_option("--where-a", where_a, "column=value filters for the first file");
    ttest->add_option("--where-b", where_b, "column=value filters for the second file");
    ttest->add_flag("--any-learner", any_learner, "pair rows regardless of learner");
    ttest->add_option("--out", out_file, "write the verdict as CSV here");

    std::string report_in, report_out = "results";
    auto* rep = app.add_subcommand("report", "render summary and t-test tables from raw rows");
    rep->add_option("--in", report_in, "raw result CSV")->required()->check(CLI::ExistingFile);
    rep->add_option("--out", report_out, "output directory");

    std::string synth_out = "data/synthetic";
    SyntheticSpec synth_train, synth_test;
    double test_prevalence = -1.0;
    std::size_t test_size = 2000;
    auto* synth = app.add_subcommand("synth", "write a synthetic train/test TSV pair");
    synth->add_option("--out", synth_out, "output directory");
    synth->add_option("--size", synth_train.size, "training documents");
    synth->add_option("--test-size", test_size, "test documents");
    synth->add_option("--prevalence", synth_train.prevalence, "training prevalence");
    synth->add_option("--test-prevalence", test_prevalence, "test prevalence (default: training)");
    synth->add_option("--seed", synth_train.seed, "generator seed");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*prepare) {
            const auto config = load_config(prepare_opts);
            run_prepare(config, prepare_opts.out);
            std::cout << "prepared " << config.datasets.size() << " dataset(s) under "
                      << (fs::path(prepare_opts.out) / "prepared").string() << '\n';
            return 0;
        }
        if (*sel) {
            const auto config = load_config(select_opts);
            const auto failures = run_selection_only(config, {select_opts.out, config.jobs, &std::cout});
            for (const auto& f : failures) std::cerr << "FAILED " << f.key << ": " << f.message << '\n';
            return failures.empty() ? 0 : 1;
        }
        if (*protocol) {
            const auto config = load_config(protocol_opts);
            const auto result = run_protocol(config, {protocol_opts.out, config.jobs, &std::cerr});
            std::cout << result.rows.size() << " rows written to "
                      << (fs::path(protocol_opts.out) / "raw.csv").string();
            if (result.resumed) std::cout << " (" << result.resumed << " units resumed)";
            std::cout << '\n';
            for (const auto& f : result.failures)
                std::cerr << "FAILED " << f.key << ": " << f.message << '\n';
            return result.ok() ? 0 : 1;
        }
        if (*ttest) {
            const auto a = filter_rows(read_rows_csv(fs::path(file_a)), where_a);
            const auto b = filter_rows(read_rows_csv(fs::path(file_b)), where_b);
            const auto row = compare_rows(a, b, metric, !any_learner);
            const auto& v = row.verdict;
            std::cout << "pairs " << row.pairs << "  t " << format_double(v.t) << "  df "
                      << format_double(v.df) << "  p " << format_double(v.p_value) << "  verdict "
                      << v.symbol << (v.degenerate ? " (degenerate)" : "") << '\n';
            if (!out_file.empty()) {
                std::ofstream out(out_file, std::ios::binary);
                out << "metric,pairs,t,df,p_value,symbol,degenerate\r\n"
                    << metric << ',' << row.pairs << ',' << format_double(v.t) << ','
                    << format_double(v.df) << ',' << format_double(v.p_value) << ',' << v.symbol << ','
                    << (v.degenerate ? "true" : "false") << "\r\n";
                if (!out) throw Error("cannot write " + out_file);
            }
            return 0;
        }
        if (*rep) {
            report(read_rows_csv(fs::path(report_in)), report_out);
            std::cout << "report written to " << report_out << '\n';
            return 0;
        }
        if (*synth) {
            fs::create_directories(synth_out);
            synth_test = synth_train;
            synth_test.size = test_size;
            if (test_prevalence >= 0.0) synth_test.prevalence = test_prevalence;
            synth_test.seed = derive_seed(synth_train.seed, {2});
            write_dataset(fs::path(synth_out) / "train.tsv", synthetic_corpus(synth_train));
            write_dataset(fs::path(synth_out) / "test.tsv", synthetic_corpus(synth_test));
            std::cout << "wrote " << synth_out << "/train.tsv and test.tsv\n";
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
