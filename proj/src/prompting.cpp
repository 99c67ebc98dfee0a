#include "rvos/prompting.hpp"

#include "rvos/error.hpp"

namespace rvos {

StructuredReply ask_structured(ChatBackend& backend, ChatRequest request, std::string_view tag,
                               const ReplyCheck& check) {
    if (!request.schema) throw Error(ErrorCode::InvalidSpec, "ask_structured needs a schema");
    const std::string schema_name = *request.schema;
    for (int attempt = 0;; ++attempt) {
        std::string raw;
        std::string problem;
        try {
            auto response = chat(backend, request);
            raw = response.text;
            if (check) problem = check(*response.parsed);
            if (problem.empty()) return {std::move(*response.parsed), std::move(raw), attempt};
        } catch (const SchemaViolation& e) {
            raw = e.raw_text();
            problem = e.detail();
        }
        if (attempt >= 1) throw SchemaViolation(problem + " (after repair)", raw);
        request.messages.push_back(text_message("assistant", raw));
        request.messages.push_back(text_message(
            "user", tag_line(tag) + "\nYour previous reply was rejected: " + problem +
                        "\nReply again with a single JSON object that matches schema " + schema_name +
                        " and nothing else."));
    }
}

} // namespace rvos
