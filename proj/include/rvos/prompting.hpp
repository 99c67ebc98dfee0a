#pragma once

#include "rvos/protocol.hpp"

#include <functional>
#include <string>
#include <string_view>

namespace rvos {

inline std::string tag_line(std::string_view tag) { return "#tag:" + std::string(tag); }

inline ImagePart image_part(const RgbImage& image) { return ImagePart{encode_png(image)}; }

/// Extra semantic check run after schema validation; returns a problem or "".
using ReplyCheck = std::function<std::string(const nlohmann::json&)>;

struct StructuredReply {
    nlohmann::json doc;
    std::string raw;
    int repairs = 0;
};

/// Sends `request` (whose schema must be set) and allows exactly one repair
/// re-ask when the reply fails the schema or `check`. The re-ask carries the
/// same tag. A second failure is rethrown as SchemaViolation.
StructuredReply ask_structured(ChatBackend& backend, ChatRequest request, std::string_view tag,
                               const ReplyCheck& check = {});

} // namespace rvos
