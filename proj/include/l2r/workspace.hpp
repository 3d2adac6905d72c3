#pragma once

#include "l2r/ake.hpp"
#include "l2r/config.hpp"
#include "l2r/knowledge_store.hpp"
#include "l2r/llm_gateway.hpp"
#include "l2r/pipeline.hpp"
#include "l2r/retrieval.hpp"

#include <memory>
#include <mutex>
#include <string>
#include <vector>

namespace l2r {

std::unique_ptr<Embedder> make_embedder(const EmbedderSettings& settings);
std::unique_ptr<ChatProvider> make_provider(const ProviderSettings& settings);

/// Live state behind the CLI and the service: configuration, knowledge base,
/// embedding cache, current index, prompts, provider and AKE jobs.
///
/// Not internally synchronized except for the index pointer and the runtime
/// pipeline config, which may be read while another thread swaps them.
class Workspace {
public:
    /// Loads kb.jsonl, the sidecar (when it matches the embedder), prompt
    /// overrides and AKE jobs from the configured directories, then builds
    /// the index.
    explicit Workspace(AppConfig config);
    /// Injected collaborators, used by tests.
    Workspace(AppConfig config, std::unique_ptr<Embedder> embedder, std::unique_ptr<ChatProvider> provider);

    [[nodiscard]] const AppConfig& config() const noexcept { return config_; }
    [[nodiscard]] KnowledgeBase& kb() noexcept { return kb_; }
    [[nodiscard]] const KnowledgeBase& kb() const noexcept { return kb_; }
    [[nodiscard]] Embedder& embedder() noexcept { return *embedder_; }
    [[nodiscard]] ChatProvider& provider() noexcept { return *provider_; }
    [[nodiscard]] const PromptLibrary& prompts() const noexcept { return prompts_; }
    [[nodiscard]] std::vector<AkeJob>& jobs() noexcept { return jobs_; }

    [[nodiscard]] std::shared_ptr<const VectorIndex> index() const;
    /// Re-embeds changed texts only and swaps the index in atomically.
    void rebuild_index();
    /// Builds an index for another knowledge base state without swapping.
    std::shared_ptr<const VectorIndex> build_for(const KnowledgeBase& kb);
    void swap_index(std::shared_ptr<const VectorIndex> index);

    [[nodiscard]] PipelineConfig pipeline_config() const;
    void set_pipeline_config(PipelineConfig config);

    /// Pipeline over the current index snapshot and runtime config.
    [[nodiscard]] Pipeline pipeline();

    /// Writes kb.jsonl, embeddings.bin, embedder.id and jobs.jsonl.
    void save() const;

    [[nodiscard]] std::string next_job_id() const;

private:
    void load();

    AppConfig config_;
    std::unique_ptr<Embedder> embedder_;
    std::unique_ptr<ChatProvider> provider_;
    PromptLibrary prompts_;
    KnowledgeBase kb_;
    EmbeddingCache cache_;
    std::vector<AkeJob> jobs_;

    mutable std::mutex mu_;
    std::shared_ptr<const VectorIndex> index_;
    PipelineConfig runtime_;
};

}  // namespace l2r
