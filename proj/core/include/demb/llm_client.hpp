#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "demb/corpus.hpp"
#include "demb/dataset.hpp"

namespace demb {

struct LlmClientConfig {
    std::string endpoint_url;  // http://host:port/path
    std::string model_name;
    std::string api_key_env_var = "DEMB_API_KEY";
    double timeout_seconds = 10.0;
    std::size_t max_retries = 2;
    std::size_t max_concurrency = 4;
    void validate() const;
};

struct LlmQueryResult {
    std::string query;
    bool fallback = false;  // true when the offline stub produced the query
    std::string failure;    // last failure when fallback is true
};

// The prompt template sent per chunk, with the chunk text inlined.
std::string build_query_prompt(const Chunk& chunk);

// HTTP query generator with validation, bounded retries, and a deterministic
// stub fallback. The API key is read from the configured environment variable
// at call time and is never persisted.
class LlmQueryClient {
public:
    LlmQueryClient(LlmClientConfig cfg, const StubQueryGenerator& stub);

    LlmQueryResult generate(const Chunk& chunk) const;
    // Bounded-concurrency batch; results come back in chunk order.
    std::vector<LlmQueryResult> generate_batch(const std::vector<Chunk>& chunks) const;

    QueryGenerator as_querygen() const;

private:
    LlmClientConfig cfg_;
    const StubQueryGenerator* stub_;
};

}  // namespace demb
