#include "l2r/cli.hpp"

#include "l2r/config.hpp"
#include "l2r/errors.hpp"
#include "l2r/evaluation.hpp"
#include "l2r/service.hpp"
#include "l2r/util.hpp"
#include "l2r/workspace.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <iostream>
#include <optional>

namespace l2r {

namespace {

namespace fs = std::filesystem;

struct GlobalFlags {
    std::string config_path;
    std::optional<double> alpha;
    std::optional<std::size_t> k;
    std::string provider;
};

AppConfig load_config(const GlobalFlags& flags) {
    AppConfig config;
    if (!flags.config_path.empty()) {
        config = AppConfig::load(flags.config_path);
    } else if (fs::exists("l2r.toml")) {
        config = AppConfig::load("l2r.toml");
    }
    if (flags.alpha) config.pipeline.refusal.alpha = *flags.alpha;
    if (flags.k) config.pipeline.k = *flags.k;
    if (!flags.provider.empty()) config.provider.kind = flags.provider;
    config.validate();
    return config;
}

std::vector<double> parse_number_list(const std::vector<std::string>& items, const char* what, bool allow_inf) {
    std::vector<double> out;
    for (const auto& item : items) {
        double v = 0.0;
        if (!parse_double(item, v) || std::isnan(v) || (!allow_inf && std::isinf(v))) {
            throw ValidationError(std::string("bad ") + what + " value '" + item + "'");
        }
        out.push_back(v);
    }
    return out;
}

}  // namespace

int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Knowledge-scoped question answering with refusal", "l2r"};
    app.require_subcommand(1);
    app.failure_message(CLI::FailureMessage::help);

    GlobalFlags flags;
    app.add_option("--config", flags.config_path, "TOML config file (default: ./l2r.toml if present)");
    app.add_option("--alpha", flags.alpha, "Hard-refusal threshold override (> 0, or inf)")
        ->check(CLI::Validator(
            [](std::string& value) {
                double v = 0;
                if (!CLI::detail::lexical_cast(value, v) || !(v > 0)) return std::string("must be > 0 or inf");
                return std::string{};
            },
            "POSITIVE|inf"));
    app.add_option("--k", flags.k, "Retrieval depth override")->check(CLI::PositiveNumber);
    app.add_option("--provider", flags.provider, "Chat provider override")->check(CLI::IsMember({"mock", "openai"}));

    // init
    auto* init = app.add_subcommand("init", "Create a config file and an empty knowledge base");
    std::string init_dir = ".";
    init->add_option("dir", init_dir, "Target directory");

    // kb
    auto* kb = app.add_subcommand("kb", "Knowledge base maintenance");
    kb->require_subcommand(1);
    auto* kb_add = kb->add_subcommand("add", "Add one fact");
    std::string add_text;
    double add_conf = 1.0;
    std::string add_source = "manual";
    bool add_verified = false;
    kb_add->add_option("text", add_text, "Fact sentence")->required();
    kb_add->add_option("--confidence", add_conf, "Confidence in [0, 1]")->check(CLI::Range(0.0, 1.0));
    kb_add->add_option("--source", add_source)->check(CLI::IsMember({"manual", "ake", "corpus"}));
    kb_add->add_flag("--verified", add_verified, "Human-verified (confidence 1.0)");

    auto* kb_import = kb->add_subcommand("import", "Import kb.jsonl records or a text corpus");
    std::string import_path;
    std::string import_mode = "kb_jsonl";
    double import_conf = 1.0;
    kb_import->add_option("file", import_path)->required();
    kb_import->add_option("--mode", import_mode)->check(CLI::IsMember({"kb_jsonl", "corpus"}));
    kb_import->add_option("--confidence", import_conf, "Confidence for corpus sentences")->check(CLI::Range(0.0, 1.0));

    auto* kb_export = kb->add_subcommand("export", "Write the KB as JSONL");
    std::string export_path = "-";
    kb_export->add_option("file", export_path, "Output path, - for stdout");

    auto* kb_list = kb->add_subcommand("list", "List entries");
    bool list_all = false;
    kb_list->add_flag("--all", list_all, "Include deleted entries");

    auto* kb_setc = kb->add_subcommand("set-confidence", "Change an entry's confidence");
    EntryId setc_id = 0;
    double setc_value = 0.0;
    kb_setc->add_option("id", setc_id)->required();
    kb_setc->add_option("value", setc_value)->required()->check(CLI::Range(0.0, 1.0));

    auto* kb_rm = kb->add_subcommand("remove", "Soft-delete an entry");
    EntryId rm_id = 0;
    kb_rm->add_option("id", rm_id)->required();

    // enrich
    auto* enrich = app.add_subcommand("enrich", "Automatic knowledge enrichment from seed questions");
    std::vector<std::string> seeds;
    std::string seeds_file;
    std::size_t enrich_m = 0;
    bool enrich_auto = false;
    enrich->add_option("seeds", seeds, "Seed questions");
    enrich->add_option("--seeds-file", seeds_file, "One seed question per line")->check(CLI::ExistingFile);
    enrich->add_option("-m,--count", enrich_m, "Questions to generate")->required()->check(CLI::PositiveNumber);
    enrich->add_flag("--auto-accept", enrich_auto, "Insert without review");

    // ask
    auto* ask = app.add_subcommand("ask", "Answer one question");
    std::string ask_question;
    std::vector<std::string> ask_choices;
    std::string ask_task;
    bool ask_forced = false;
    ask->add_option("question", ask_question)->required();
    ask->add_option("--choice", ask_choices, "Answer option (repeatable)");
    ask->add_option("--task", ask_task)->check(CLI::IsMember({"open", "mc1", "mc2"}));
    ask->add_flag("--forced", ask_forced, "Bypass both refusal gates");

    // eval
    auto* eval = app.add_subcommand("eval", "Gated evaluation over an MC dataset");
    std::string eval_dataset;
    std::string eval_out;
    std::string eval_responses;
    unsigned eval_par = 0;
    bool eval_no_success = false;
    eval->add_option("dataset", eval_dataset)->required()->check(CLI::ExistingFile);
    eval->add_option("--out", eval_out, "Write the full report JSON here");
    eval->add_option("--parallelism", eval_par)->check(CLI::PositiveNumber);
    eval->add_flag("--no-success-rate", eval_no_success, "Skip the forced pass over refused questions");

    // sweep
    auto* sweep = app.add_subcommand("sweep", "Alpha sweep replayed from one forced pass");
    std::string sweep_dataset;
    std::vector<std::string> sweep_alphas;
    std::string sweep_out = "sweep.csv";
    std::string sweep_cache;
    unsigned sweep_par = 0;
    sweep->add_option("dataset", sweep_dataset, "MC dataset (not needed with an existing --cache)");
    sweep->add_option("--alphas", sweep_alphas, "Comma-separated thresholds")->required()->delimiter(',');
    sweep->add_option("--out", sweep_out, "CSV output path");
    sweep->add_option("--cache", sweep_cache, "Forced-pass cache: replayed if present, written otherwise");
    sweep->add_option("--parallelism", sweep_par)->check(CLI::PositiveNumber);

    // ratio
    auto* ratio = app.add_subcommand("ratio", "Gold-knowledge ratio experiment");
    std::string ratio_dataset;
    std::vector<std::string> ratio_values{"0", "0.25", "0.5", "0.75", "1"};
    std::string ratio_out = "ratio.csv";
    unsigned ratio_par = 0;
    ratio->add_option("dataset", ratio_dataset)->required()->check(CLI::ExistingFile);
    ratio->add_option("--ratios", ratio_values, "Comma-separated ratios in [0, 1]")->delimiter(',');
    ratio->add_option("--out", ratio_out, "CSV output path");
    ratio->add_option("--parallelism", ratio_par)->check(CLI::PositiveNumber);

    // serve
    auto* serve = app.add_subcommand("serve", "Run the HTTP service");
    std::string serve_bind;
    int serve_port = -1;
    serve->add_option("--bind", serve_bind);
    serve->add_option("--port", serve_port)->check(CLI::Range(0, 65535));

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (init->parsed()) {
            fs::create_directories(init_dir);
            auto config_path = fs::path(init_dir) / "l2r.toml";
            if (!fs::exists(config_path)) write_file(config_path.string(), default_config_toml());
            auto config = AppConfig::load(config_path.string());
            fs::create_directories(config.paths.kb_dir);
            auto kb_file = fs::path(config.paths.kb_dir) / "kb.jsonl";
            if (!fs::exists(kb_file)) write_file(kb_file.string(), "");
            out << "initialized " << config_path.string() << "\n";
            return kExitOk;
        }

        auto config = load_config(flags);
        auto parallelism = [&](unsigned flag) { return flag ? flag : config.answer_parallelism; };

        if (kb->parsed()) {
            Workspace ws(config);
            auto& base = ws.kb();
            if (kb_add->parsed()) {
                const auto& e = base.upsert_entry(add_text, add_conf, *source_from_string(add_source), add_verified);
                ws.rebuild_index();
                ws.save();
                out << to_canonical_json(e) << "\n";
            } else if (kb_import->parsed()) {
                auto mode = import_mode == "corpus" ? ImportMode::corpus_text : ImportMode::kb_jsonl;
                auto n = base.import_file(import_path, mode, import_conf);
                ws.rebuild_index();
                ws.save();
                out << n << "\n";
            } else if (kb_export->parsed()) {
                if (export_path == "-") {
                    out << base.export_jsonl();
                } else {
                    out << base.export_file(export_path) << "\n";
                }
            } else if (kb_list->parsed()) {
                for (const auto& e : base.entries()) {
                    if (!list_all && e.deleted()) continue;
                    out << e.id << "\t" << format_decimal(e.confidence) << "\t" << to_string(e.source) << "\t"
                        << (e.deleted() ? "[deleted] " : "") << e.text << "\n";
                }
            } else if (kb_setc->parsed()) {
                out << to_canonical_json(base.set_confidence(setc_id, setc_value)) << "\n";
                ws.rebuild_index();
                ws.save();
            } else if (kb_rm->parsed()) {
                base.remove(rm_id);
                ws.rebuild_index();
                ws.save();
                out << "removed " << rm_id << "\n";
            }
            return kExitOk;
        }

        if (enrich->parsed()) {
            if (!seeds_file.empty()) {
                for (auto& line : split_lines(read_file(seeds_file))) {
                    if (!trim(line).empty()) seeds.emplace_back(trim(line));
                }
            }
            Workspace ws(config);
            KnowledgeEnricher enricher(ws.provider(), ws.prompts(), config.ake);
            auto job = enricher.enrich(ws.kb(), seeds, enrich_m, enrich_auto || config.ake_auto_accept,
                                       ws.next_job_id());
            ws.jobs().push_back(job);
            ws.rebuild_index();
            ws.save();
            out << to_json(job).dump(2) << "\n";
            return job.state == JobState::failed ? kExitDomainError : kExitOk;
        }

        if (ask->parsed()) {
            Workspace ws(config);
            Question q;
            q.text = ask_question;
            q.choices = ask_choices;
            q.task = ask_task.empty() ? (ask_choices.empty() ? Task::open : Task::mc1) : *task_from_string(ask_task);
            auto pipeline = ws.pipeline();
            auto response = ask_forced ? pipeline.forced_answer(q) : pipeline.answer_question(q);
            out << to_json(response, "").dump(2) << "\n";
            return kExitOk;
        }

        if (eval->parsed()) {
            Workspace ws(config);
            auto dataset = load_dataset(eval_dataset);
            auto pipeline = ws.pipeline();
            EvalOptions options{parallelism(eval_par), {}};
            auto report = run_eval(dataset, pipeline, options);
            if (!eval_no_success) refusal_success_rate(report, dataset, pipeline, options);
            auto j = to_json(report);
            if (!eval_out.empty()) write_file(eval_out, j.dump(2) + "\n");
            j.erase("per_question");
            out << j.dump(2) << "\n";
            return kExitOk;
        }

        if (sweep->parsed()) {
            auto alphas = parse_number_list(sweep_alphas, "alpha", true);
            ForcedCache cache;
            if (!sweep_cache.empty() && fs::exists(sweep_cache)) {
                cache = parse_forced_cache(read_file(sweep_cache));
            } else {
                if (sweep_dataset.empty()) throw PreconditionError("a dataset is required to record the forced pass");
                Workspace ws(config);
                cache = record_forced_pass(load_dataset(sweep_dataset), ws.pipeline(),
                                           EvalOptions{parallelism(sweep_par), {}});
                if (!sweep_cache.empty()) write_file(sweep_cache, forced_cache_jsonl(cache));
            }
            auto csv = sweep_csv(sweep_alpha(cache, alphas));
            write_file(sweep_out, csv);
            out << csv;
            return kExitOk;
        }

        if (ratio->parsed()) {
            auto ratios = parse_number_list(ratio_values, "ratio", false);
            auto dataset = load_dataset(ratio_dataset);
            auto embedder = make_embedder(config.embedder);
            auto provider = make_provider(config.provider);
            PromptLibrary prompts;
            if (!config.paths.prompts_dir.empty()) prompts.load_overrides(config.paths.prompts_dir);
            auto rows = gold_ratio_experiment(dataset, ratios, *embedder, *provider, prompts, config.pipeline,
                                              EvalOptions{parallelism(ratio_par), {}});
            auto csv = ratio_csv(rows);
            write_file(ratio_out, csv);
            out << csv;
            return kExitOk;
        }

        if (serve->parsed()) {
            if (!serve_bind.empty()) config.server.bind = serve_bind;
            if (serve_port >= 0) config.server.port = serve_port;
            Workspace ws(config);
            Service service(ws);
            err << "listening on " << config.server.bind << ":" << config.server.port << "\n";
            if (!service.listen(config.server.bind, config.server.port)) {
                throw IoError("cannot bind " + config.server.bind + ":" + std::to_string(config.server.port));
            }
            return kExitOk;
        }
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return kExitDomainError;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitDomainError;
    }
    return kExitUsage;
}

}  // namespace l2r
