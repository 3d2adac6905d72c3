#include "l2r/service.hpp"

#include "l2r/evaluation.hpp"
#include "l2r/errors.hpp"
#include "l2r/util.hpp"

#include <httplib.h>

#include <atomic>
#include <cmath>
#include <limits>
#include <shared_mutex>
#include <thread>

namespace l2r {

namespace {

using ojson = nlohmann::ordered_json;

struct HttpError {
    int status;
    const char* type;
};

HttpError classify(const std::exception& e) {
    if (dynamic_cast<const NotFoundError*>(&e)) return {404, "not_found"};
    if (dynamic_cast<const ConflictError*>(&e)) return {409, "conflict"};
    if (dynamic_cast<const DuplicateIdError*>(&e)) return {409, "duplicate_id"};
    if (dynamic_cast<const PipelineError*>(&e)) return {502, "pipeline_error"};
    if (dynamic_cast<const GatewayError*>(&e)) return {502, "provider_error"};
    if (dynamic_cast<const ProviderError*>(&e)) return {502, "embedder_error"};
    if (dynamic_cast<const IoError*>(&e) || dynamic_cast<const CacheCorrupt*>(&e)) return {500, "io_error"};
    if (dynamic_cast<const Error*>(&e)) return {400, "invalid_request"};
    if (dynamic_cast<const nlohmann::json::exception*>(&e)) return {400, "invalid_request"};
    return {500, "internal"};
}

std::uint64_t audit_id_of(const std::exception& e) {
    if (auto* p = dynamic_cast<const PipelineError*>(&e)) return p->audit_id();
    if (auto* g = dynamic_cast<const GatewayError*>(&e)) return g->audit_id();
    return 0;
}

void send(httplib::Response& res, int status, const ojson& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

nlohmann::json body_of(const httplib::Request& req) {
    if (req.body.empty()) return nlohmann::json::object();
    try {
        auto j = nlohmann::json::parse(req.body);
        if (!j.is_object()) throw ValidationError("request body must be a JSON object");
        return j;
    } catch (const nlohmann::json::parse_error&) {
        throw ValidationError("malformed JSON body");
    }
}

std::string require_string(const nlohmann::json& body, const char* key) {
    auto it = body.find(key);
    if (it == body.end() || !it->is_string()) throw ValidationError(std::string("'") + key + "' must be a string");
    return it->get<std::string>();
}

double optional_number(const nlohmann::json& body, const char* key, double fallback) {
    auto it = body.find(key);
    if (it == body.end()) return fallback;
    if (!it->is_number()) throw ValidationError(std::string("'") + key + "' must be a number");
    return it->get<double>();
}

bool optional_bool(const nlohmann::json& body, const char* key, bool fallback) {
    auto it = body.find(key);
    if (it == body.end()) return fallback;
    if (!it->is_boolean()) throw ValidationError(std::string("'") + key + "' must be a boolean");
    return it->get<bool>();
}

std::vector<std::string> string_array(const nlohmann::json& body, const char* key) {
    std::vector<std::string> out;
    auto it = body.find(key);
    if (it == body.end()) return out;
    if (!it->is_array()) throw ValidationError(std::string("'") + key + "' must be an array of strings");
    for (const auto& v : *it) {
        if (!v.is_string()) throw ValidationError(std::string("'") + key + "' must be an array of strings");
        out.push_back(v.get<std::string>());
    }
    return out;
}

AskOverrides overrides_of(const nlohmann::json& body) {
    AskOverrides out;
    auto it = body.find("overrides");
    if (it == body.end() || it->is_null()) return out;
    if (!it->is_object()) throw ValidationError("'overrides' must be an object");
    for (auto o = it->begin(); o != it->end(); ++o) {
        if (o.key() == "alpha") {
            // null is +inf, as in /v1/config.
            if (o->is_null()) {
                out.alpha = std::numeric_limits<double>::infinity();
                continue;
            }
            if (!o->is_number() || !(o->get<double>() > 0.0)) throw ValidationError("'overrides.alpha' must be > 0 or null");
            out.alpha = o->get<double>();
        } else if (o.key() == "k") {
            if (!o->is_number_unsigned() || o->get<std::size_t>() == 0) {
                throw ValidationError("'overrides.k' must be a positive integer");
            }
            out.k = o->get<std::size_t>();
        } else {
            throw ValidationError("unknown override '" + o.key() + "'");
        }
    }
    return out;
}

ojson entry_json(const KnowledgeEntry& entry) { return ojson::parse(to_canonical_json(entry)); }

ojson alpha_json(double alpha) { return std::isinf(alpha) ? ojson(nullptr) : ojson(alpha); }

std::vector<DatasetRecord> dataset_of(const nlohmann::json& body) {
    if (auto it = body.find("records"); it != body.end()) {
        if (!it->is_array()) throw ValidationError("'records' must be an array");
        std::string jsonl;
        for (const auto& r : *it) jsonl += r.dump() + "\n";
        return parse_dataset(jsonl);
    }
    if (auto it = body.find("dataset"); it != body.end() && it->is_string()) return load_dataset(it->get<std::string>());
    throw ValidationError("either 'records' or 'dataset' (path) is required");
}

EvalOptions eval_options_of(const nlohmann::json& body, unsigned default_parallelism) {
    EvalOptions options;
    options.parallelism = default_parallelism;
    if (auto it = body.find("parallelism"); it != body.end()) {
        if (!it->is_number_unsigned() || it->get<unsigned>() == 0) {
            throw ValidationError("'parallelism' must be a positive integer");
        }
        options.parallelism = it->get<unsigned>();
    }
    options.overrides = overrides_of(body);
    return options;
}

}  // namespace

struct Service::Impl {
    explicit Impl(Workspace& w) : ws(w) { routes(); }

    ~Impl() {
        svr.stop();
        join_worker();
    }

    Workspace& ws;
    httplib::Server svr;
    std::shared_mutex kb_mu;
    std::mutex jobs_mu;
    std::mutex worker_mu;
    std::atomic<bool> lease{false};
    std::thread worker;

    using Handler = std::function<void(const httplib::Request&, httplib::Response&)>;

    Handler guarded(Handler fn) {
        return [fn = std::move(fn)](const httplib::Request& req, httplib::Response& res) {
            try {
                fn(req, res);
            } catch (const std::exception& e) {
                auto [status, type] = classify(e);
                ojson err{{"type", type}, {"message", e.what()}};
                if (auto id = audit_id_of(e)) err["audit_id"] = id;
                send(res, status, {{"error", err}});
            }
        };
    }

    void require_unleased() const {
        if (lease.load()) throw ConflictError("knowledge base is locked by a running AKE job");
    }

    void join_worker() {
        std::lock_guard lock(worker_mu);
        if (worker.joinable()) worker.join();
    }

    /// After any KB mutation: new index, then persist.
    void commit() {
        ws.rebuild_index();
        std::lock_guard lock(jobs_mu);
        ws.save();
    }

    void routes() {
        const auto& origins = ws.config().server.cors_origins;
        svr.set_post_routing_handler([origins](const httplib::Request& req, httplib::Response& res) {
            auto origin = req.get_header_value("Origin");
            if (origin.empty()) return;
            bool allowed = std::find(origins.begin(), origins.end(), origin) != origins.end() ||
                           std::find(origins.begin(), origins.end(), "*") != origins.end();
            if (!allowed) return;
            res.set_header("Access-Control-Allow-Origin", origin);
            res.set_header("Vary", "Origin");
        });
        svr.Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) {
            res.status = 204;
            res.set_header("Access-Control-Allow-Methods", "GET, POST, PUT, PATCH, DELETE, OPTIONS");
            res.set_header("Access-Control-Allow-Headers", "Content-Type");
        });

        svr.Get("/healthz", guarded([this](const httplib::Request&, httplib::Response& res) {
            std::shared_lock lock(kb_mu);
            send(res, 200,
                 {{"status", "ok"},
                  {"kb_entries", ws.kb().active_count()},
                  {"indexed", ws.index()->size()},
                  {"embedder", ws.embedder().id()},
                  {"ake_running", lease.load()}});
        }));

        svr.Post("/v1/ask", guarded([this](const httplib::Request& req, httplib::Response& res) { ask(req, res); }));

        svr.Get("/v1/knowledge", guarded([this](const httplib::Request& req, httplib::Response& res) {
            bool include_deleted = req.get_param_value("include_deleted") == "true";
            std::shared_lock lock(kb_mu);
            auto entries = ojson::array();
            for (const auto& e : ws.kb().entries()) {
                if (include_deleted || !e.deleted()) entries.push_back(entry_json(e));
            }
            auto count = entries.size();
            send(res, 200, {{"entries", std::move(entries)}, {"count", count}, {"next_id", ws.kb().next_id()}});
        }));

        svr.Post("/v1/knowledge", guarded([this](const httplib::Request& req, httplib::Response& res) {
            auto body = body_of(req);
            auto text = require_string(body, "text");
            auto confidence = optional_number(body, "confidence", 1.0);
            auto source_name = body.value("source", std::string("manual"));
            auto source = source_from_string(source_name);
            if (!source) throw ValidationError("unknown source '" + source_name + "'");
            bool verified = optional_bool(body, "verified", false);

            std::unique_lock lock(kb_mu);
            require_unleased();
            auto entry = ws.kb().upsert_entry(text, confidence, *source, verified);
            commit();
            send(res, 201, entry_json(entry));
        }));

        svr.Patch(R"(/v1/knowledge/(\d+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
            auto id = std::stoull(req.matches[1].str());
            auto body = body_of(req);
            for (auto it = body.begin(); it != body.end(); ++it) {
                if (it.key() != "text" && it.key() != "confidence") {
                    throw ValidationError("unknown field '" + it.key() + "'");
                }
            }
            if (body.empty()) throw ValidationError("nothing to update; send 'text' and/or 'confidence'");

            std::unique_lock lock(kb_mu);
            require_unleased();
            auto& kb = ws.kb();
            const auto& current = kb.at(id);
            if (current.deleted()) throw NotFoundError("entry " + std::to_string(id) + " is deleted");
            // Validate both fields before touching the entry.
            std::optional<std::string> text;
            if (body.contains("text")) {
                text = require_string(body, "text");
                validate_single_fact(*text);
            }
            std::optional<double> confidence;
            if (body.contains("confidence")) {
                confidence = optional_number(body, "confidence", 0.0);
                if (!(*confidence >= 0.0 && *confidence <= 1.0)) throw RangeError("confidence outside [0, 1]");
            }
            if (text) kb.update_text(id, *text);
            if (confidence) kb.set_confidence(id, *confidence);
            commit();
            send(res, 200, entry_json(kb.at(id)));
        }));

        svr.Delete(R"(/v1/knowledge/(\d+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
            auto id = std::stoull(req.matches[1].str());
            std::unique_lock lock(kb_mu);
            require_unleased();
            ws.kb().remove(id);
            commit();
            send(res, 200, entry_json(ws.kb().at(id)));
        }));

        svr.Post("/v1/knowledge/import", guarded([this](const httplib::Request& req, httplib::Response& res) {
            auto body = body_of(req);
            auto mode = body.value("mode", std::string("kb_jsonl"));
            auto content = require_string(body, "content");
            auto confidence = optional_number(body, "default_confidence", 1.0);

            std::unique_lock lock(kb_mu);
            require_unleased();
            std::size_t n = 0;
            if (mode == "kb_jsonl") {
                n = ws.kb().import_jsonl(content);
            } else if (mode == "corpus") {
                n = ws.kb().import_corpus(content, confidence);
            } else {
                throw ValidationError("'mode' must be \"kb_jsonl\" or \"corpus\"");
            }
            commit();
            send(res, 200, {{"imported", n}, {"kb_entries", ws.kb().active_count()}});
        }));

        svr.Post("/v1/ake/jobs", guarded([this](const httplib::Request& req, httplib::Response& res) { start_job(req, res); }));

        svr.Get("/v1/ake/jobs", guarded([this](const httplib::Request&, httplib::Response& res) {
            std::lock_guard lock(jobs_mu);
            auto jobs = ojson::array();
            for (const auto& job : ws.jobs()) jobs.push_back(to_json(job));
            send(res, 200, {{"jobs", std::move(jobs)}});
        }));

        svr.Get(R"(/v1/ake/jobs/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
            auto id = req.matches[1].str();
            std::lock_guard lock(jobs_mu);
            for (const auto& job : ws.jobs()) {
                if (job.job_id == id) return send(res, 200, to_json(job));
            }
            throw NotFoundError("no AKE job '" + id + "'");
        }));

        svr.Post(R"(/v1/ake/review/(\d+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
            review(req, res);
        }));

        svr.Get("/v1/config", guarded([this](const httplib::Request&, httplib::Response& res) {
            send(res, 200, runtime_json(ws.pipeline_config()));
        }));

        svr.Put("/v1/config", guarded([this](const httplib::Request& req, httplib::Response& res) {
            auto body = body_of(req);
            require_unleased();
            auto next = apply_runtime(ws.pipeline_config(), body);
            ws.set_pipeline_config(next);
            send(res, 200, runtime_json(next));
        }));

        svr.Post("/v1/eval/run", guarded([this](const httplib::Request& req, httplib::Response& res) {
            auto body = body_of(req);
            auto dataset = dataset_of(body);
            auto options = eval_options_of(body, ws.config().answer_parallelism);
            bool with_success = optional_bool(body, "success_rate", true);
            auto pipeline = ws.pipeline();
            auto report = run_eval(dataset, pipeline, options);
            ojson out;
            if (with_success) {
                auto rate = refusal_success_rate(report, dataset, pipeline, options);
                out = to_json(report);
                out["success"] = {{"refused", rate.refused}, {"would_be_incorrect", rate.would_be_incorrect}};
            } else {
                out = to_json(report);
            }
            send(res, 200, out);
        }));

        svr.Post("/v1/eval/sweep", guarded([this](const httplib::Request& req, httplib::Response& res) { sweep(req, res); }));
    }

    void ask(const httplib::Request& req, httplib::Response& res) {
        auto body = body_of(req);
        Question q;
        q.text = require_string(body, "question");
        if (trim(q.text).empty()) throw ValidationError("'question' is empty");
        q.choices = string_array(body, "choices");
        if (auto it = body.find("task"); it != body.end()) {
            if (!it->is_string()) throw ValidationError("'task' must be a string");
            auto task = task_from_string(it->get<std::string>());
            if (!task) throw ValidationError("'task' must be open, mc1 or mc2");
            q.task = *task;
        } else {
            q.task = q.choices.empty() ? Task::open : Task::mc1;
        }
        auto overrides = overrides_of(body);
        bool forced = optional_bool(body, "forced", false);
        std::string id = body.value("id", std::string{});

        auto pipeline = ws.pipeline();
        auto response = forced ? pipeline.forced_answer(q, overrides) : pipeline.answer_question(q, overrides);
        auto out = to_json(response, id);
        out["audit_id"] = response.audit_id;
        out["forced"] = response.forced;
        send(res, 200, out);
    }

    void start_job(const httplib::Request& req, httplib::Response& res) {
        auto body = body_of(req);
        auto seeds = string_array(body, "seeds");
        if (seeds.empty()) throw PreconditionError("'seeds' must hold at least one question");
        auto m_it = body.find("m");
        if (m_it == body.end() || !m_it->is_number_unsigned() || m_it->get<std::size_t>() == 0) {
            throw ValidationError("'m' must be a positive integer");
        }
        auto m = m_it->get<std::size_t>();
        bool auto_accept = optional_bool(body, "auto_accept", ws.config().ake_auto_accept);

        bool expected = false;
        if (!lease.compare_exchange_strong(expected, true)) {
            throw ConflictError("another AKE job is running");
        }
        join_worker();

        std::string job_id;
        {
            std::lock_guard lock(jobs_mu);
            job_id = ws.next_job_id();
            AkeJob placeholder;
            placeholder.job_id = job_id;
            placeholder.seeds = seeds;
            placeholder.m_target = m;
            placeholder.state = JobState::running;
            ws.jobs().push_back(std::move(placeholder));
        }

        std::lock_guard lock(worker_mu);
        worker = std::thread([this, seeds = std::move(seeds), m, auto_accept, job_id] {
            run_job(seeds, m, auto_accept, job_id);
        });
        send(res, 202, {{"job_id", job_id}, {"state", "running"}});
    }

    void run_job(const std::vector<std::string>& seeds, std::size_t m, bool auto_accept, const std::string& job_id) {
        KnowledgeBase working;
        {
            std::shared_lock lock(kb_mu);
            working = ws.kb();
        }
        AkeJob job;
        try {
            KnowledgeEnricher enricher(ws.provider(), ws.prompts(), ws.config().ake);
            job = enricher.enrich(working, seeds, m, auto_accept, job_id);
        } catch (const std::exception& e) {
            job.job_id = job_id;
            job.seeds = seeds;
            job.m_target = m;
            job.state = JobState::failed;
            job.errors.push_back({"job", "", e.what()});
        }
        {
            std::unique_lock lock(kb_mu);
            if (job.state != JobState::failed || !job.produced.empty()) {
                // Lease held: nobody else wrote the KB since the copy was taken.
                ws.kb() = std::move(working);
            }
            {
                std::lock_guard jl(jobs_mu);
                for (auto& j : ws.jobs()) {
                    if (j.job_id == job_id) j = job;
                }
            }
            try {
                commit();
            } catch (const std::exception&) {
                // Persistence failures surface on the next explicit write.
            }
        }
        lease.store(false);
    }

    void review(const httplib::Request& req, httplib::Response& res) {
        auto entry_id = std::stoull(req.matches[1].str());
        auto body = body_of(req);
        auto action = require_string(body, "action");
        if (action != "approve" && action != "approve_verified" && action != "reject") {
            throw ValidationError("'action' must be approve, approve_verified or reject");
        }
        std::optional<std::string> job_filter;
        if (body.contains("job_id")) job_filter = require_string(body, "job_id");

        std::unique_lock lock(kb_mu);
        require_unleased();
        std::unique_lock jl(jobs_mu);
        AkeJob* job = nullptr;
        for (auto& j : ws.jobs()) {
            if (job_filter && j.job_id != *job_filter) continue;
            if (j.find(entry_id)) {
                job = &j;
                break;
            }
        }
        if (!job) throw NotFoundError("no AKE item with entry id " + std::to_string(entry_id));

        ojson out;
        if (action == "reject") {
            reject_entry(*job, entry_id);
            out = {{"entry_id", entry_id}, {"job_id", job->job_id}, {"status", "rejected"}};
        } else {
            const auto& stored = approve_entry(ws.kb(), *job, entry_id, action == "approve_verified");
            out = {{"entry", entry_json(stored)}, {"job_id", job->job_id}, {"status", "approved"}};
        }
        jl.unlock();
        commit();
        send(res, 200, out);
    }

    void sweep(const httplib::Request& req, httplib::Response& res) {
        auto body = body_of(req);
        auto a_it = body.find("alphas");
        if (a_it == body.end() || !a_it->is_array() || a_it->empty()) {
            throw ValidationError("'alphas' must be a non-empty array");
        }
        std::vector<double> alphas;
        for (const auto& a : *a_it) {
            if (a.is_null()) {
                alphas.push_back(std::numeric_limits<double>::infinity());
            } else if (a.is_number() && a.get<double>() >= 0.0) {
                alphas.push_back(a.get<double>());
            } else {
                throw ValidationError("alphas must be non-negative numbers or null (+inf)");
            }
        }

        ForcedCache cache;
        if (auto c = body.find("cache"); c != body.end()) {
            if (!c->is_array()) throw ValidationError("'cache' must be an array of forced-pass records");
            std::string jsonl;
            for (const auto& r : *c) jsonl += r.dump() + "\n";
            cache = parse_forced_cache(jsonl);
        } else {
            auto dataset = dataset_of(body);
            cache = record_forced_pass(dataset, ws.pipeline(), eval_options_of(body, ws.config().answer_parallelism));
        }

        auto points = ojson::array();
        for (const auto& p : sweep_alpha(cache, alphas)) {
            points.push_back({{"alpha", alpha_json(p.alpha)},
                              {"answered", p.answered},
                              {"refused", p.refused},
                              {"accuracy", p.accuracy},
                              {"precision", p.precision},
                              {"recall", p.recall},
                              {"correct_units", p.correct_units},
                              {"answered_units", p.answered_units},
                              {"total_units", p.total_units}});
        }
        auto records = ojson::array();
        for (const auto& line : split_lines(forced_cache_jsonl(cache))) {
            if (!line.empty()) records.push_back(ojson::parse(line));
        }
        send(res, 200, {{"points", std::move(points)}, {"cache", std::move(records)}});
    }
};

Service::Service(Workspace& workspace) : impl_(std::make_unique<Impl>(workspace)) {}

Service::~Service() = default;

bool Service::listen(const std::string& host, int port) { return impl_->svr.listen(host, port); }

int Service::bind_to_any_port(const std::string& host) { return impl_->svr.bind_to_any_port(host); }

bool Service::listen_after_bind() { return impl_->svr.listen_after_bind(); }

void Service::wait_until_ready() const { impl_->svr.wait_until_ready(); }

void Service::stop() { impl_->svr.stop(); }

void Service::wait_for_jobs() { impl_->join_worker(); }

}  // namespace l2r
