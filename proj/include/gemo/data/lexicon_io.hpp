// Copyright 2026 The gemo Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <string>

#include <json.hpp>

#include "gemo/model/lexicon.hpp"

namespace gemo::data {

/// Reads the lexicon document. Words (or classes) without an embedding get
/// a hash embedding of the file's width, or `fallback_dim` when the file
/// carries no vectors at all. ParseError names the failing location.
model::LexiconSet load_lexicons(const std::string& path, std::size_t fallback_dim = 50);
model::LexiconSet lexicons_from_json(const nlohmann::json& j, std::size_t fallback_dim = 50);
nlohmann::json lexicons_to_json(const model::LexiconSet& set);

}  // namespace gemo::data
