#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>

#include "vocaldyn/score/score.hpp"

namespace vocaldyn::score {

/// Raised for documents without any part.
class EmptyScoreError : public Error {
public:
    using Error::Error;
};

struct MusicXmlOptions {
    /// Role assignment by MusicXML part id. Values: "vocal", "piano" (staff 1
    /// to piano_rh, staff 2 to piano_lh), "piano_lh", "piano_rh", "other",
    /// "ignore". Parts not listed follow the default: the first part is
    /// vocal, a later part with two staves is the piano, anything else is
    /// "other".
    std::map<std::string, std::string> part_roles;
};

/// Parses an uncompressed partwise MusicXML document.
///
/// Captured: pitched notes (ties merged, vocal chords reduced to the top
/// note), dynamics under <direction> or <notations>, wedges, the first
/// tempo, title/composer and a "catalogue-id" miscellaneous field.
/// Ignored: rests, grace and cue notes, unpitched notes, repeats.
///
/// Throws ParseError (with line) on malformed XML or unsupported layout and
/// EmptyScoreError when the document has no parts.
ScoreDocument parse_musicxml(std::string_view document, const MusicXmlOptions& options = {});
ScoreDocument read_musicxml(const std::filesystem::path& path, const MusicXmlOptions& options = {});

/// Serializes to partwise MusicXML: part P1 holds the vocal line, P2 a
/// two-staff piano, P3 (if any) the "other" notes. Positions are quantized
/// to 1/10080 of a quarter note. parse_musicxml(write_musicxml(s)) == s for
/// scores whose notes and markings lie on that grid.
std::string write_musicxml(const ScoreDocument& score);

/// Parses "P1=vocal,P2=piano" into MusicXmlOptions::part_roles.
std::map<std::string, std::string> parse_part_role_overrides(std::string_view text);

}  // namespace vocaldyn::score
