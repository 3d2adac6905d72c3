#include "l2r/workspace.hpp"

#include "l2r/errors.hpp"
#include "l2r/util.hpp"

#include <filesystem>

namespace l2r {

namespace fs = std::filesystem;

std::unique_ptr<Embedder> make_embedder(const EmbedderSettings& settings) {
    if (settings.kind == "hash") return std::make_unique<HashEmbedder>(settings.dimension);
    if (settings.kind == "remote") {
        return std::make_unique<RemoteEmbedder>(RemoteEmbedderConfig{
            settings.endpoint, settings.model, settings.dimension, settings.api_key_env, settings.timeout_ms});
    }
    throw ConfigError("unknown embedder kind '" + settings.kind + "'");
}

std::unique_ptr<ChatProvider> make_provider(const ProviderSettings& settings) {
    auto audit = settings.audit_log.empty() ? std::make_shared<AuditLog>() : std::make_shared<AuditLog>(settings.audit_log);
    if (settings.kind == "openai") return std::make_unique<OpenAIProvider>(settings.chat, audit);
    if (settings.kind == "mock") {
        auto script = settings.script.empty() ? MockProvider::Script{} : MockProvider::load_script(settings.script);
        return std::make_unique<MockProvider>(std::move(script), MockProvider::Responder{}, audit);
    }
    throw ConfigError("unknown provider kind '" + settings.kind + "'");
}

Workspace::Workspace(AppConfig config)
    : Workspace(config, make_embedder(config.embedder), make_provider(config.provider)) {}

Workspace::Workspace(AppConfig config, std::unique_ptr<Embedder> embedder, std::unique_ptr<ChatProvider> provider)
    : config_(std::move(config)), embedder_(std::move(embedder)), provider_(std::move(provider)),
      runtime_(config_.pipeline) {
    load();
}

void Workspace::load() {
    const auto id = embedder_->id();
    if (!config_.paths.prompts_dir.empty()) prompts_.load_overrides(config_.paths.prompts_dir);

    kb_ = config_.paths.kb_dir.empty() ? KnowledgeBase(id) : KnowledgeBase::load_dir(config_.paths.kb_dir, id);

    if (!config_.paths.kb_dir.empty()) {
        // The sidecar has no embedder tag of its own; embedder.id sits next to it.
        auto dir = fs::path(config_.paths.kb_dir);
        std::string stored;
        if (fs::exists(dir / "embedder.id")) stored = std::string(trim(read_file((dir / "embedder.id").string())));
        if (stored == id) {
            cache_.try_load_sidecar((dir / "embeddings.bin").string(), kb_, id, embedder_->dimension());
        }
    }
    if (!config_.paths.jobs_dir.empty()) {
        jobs_ = load_jobs(config_.paths.jobs_dir);
        for (const auto& job : jobs_) {
            for (const auto& item : job.produced) kb_.bump_next_id(item.entry.id + 1);
        }
    }
    rebuild_index();
}

std::shared_ptr<const VectorIndex> Workspace::index() const {
    std::lock_guard lock(mu_);
    return index_;
}

std::shared_ptr<const VectorIndex> Workspace::build_for(const KnowledgeBase& kb) {
    return std::make_shared<const VectorIndex>(build_index(kb, *embedder_, &cache_));
}

void Workspace::swap_index(std::shared_ptr<const VectorIndex> index) {
    std::lock_guard lock(mu_);
    index_ = std::move(index);
}

void Workspace::rebuild_index() { swap_index(build_for(kb_)); }

PipelineConfig Workspace::pipeline_config() const {
    std::lock_guard lock(mu_);
    return runtime_;
}

void Workspace::set_pipeline_config(PipelineConfig config) {
    HardPolicy{config.refusal.alpha}.validate();
    if (config.k == 0) throw ConfigError("k must be at least 1");
    std::lock_guard lock(mu_);
    runtime_ = config;
}

Pipeline Workspace::pipeline() {
    std::lock_guard lock(mu_);
    return Pipeline(index_, *embedder_, *provider_, prompts_, runtime_);
}

void Workspace::save() const {
    if (config_.paths.kb_dir.empty()) return;
    auto dir = fs::path(config_.paths.kb_dir);
    kb_.save_dir(dir.string());
    index()->save_sidecar((dir / "embeddings.bin").string());
    write_file((dir / "embedder.id").string(), embedder_->id() + "\n");
    if (!config_.paths.jobs_dir.empty()) save_jobs(config_.paths.jobs_dir, jobs_);
}

std::string Workspace::next_job_id() const { return "ake-" + std::to_string(jobs_.size() + 1); }

}  // namespace l2r
