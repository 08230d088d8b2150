#pragma once

// OCR backend contract plus the pieces that make it testable without a real
// engine: a ground-truth stub, a seeded noise injector and grammar-gated
// repair of look-alike characters in price tokens.

#include "receiptforge/core.hpp"

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace receiptforge {

struct OcrLine {
    std::string text;
    double confidence = 1.0;

    bool operator==(const OcrLine&) const = default;
};

class OcrBackend {
public:
    virtual ~OcrBackend() = default;
    /// Lines top to bottom; `region` nullopt means the whole image.
    virtual std::vector<OcrLine> recognize(const GrayImage& img, const std::optional<BBox>& region) const = 0;
};

/// Piece of a ground-truth line: `offset` is the byte offset of `text` in
/// the full line, `box` its extent in image coordinates.
struct TextUnit {
    int line = 0;
    int offset = 0;
    std::string text;
    BBox box;
};

/// Returns, for every line, the units whose box is covered by the region for
/// at least half of the unit's area, laid out at their original offsets.
class StubOcr final : public OcrBackend {
public:
    explicit StubOcr(std::vector<TextUnit> units);
    std::vector<OcrLine> recognize(const GrayImage& img, const std::optional<BBox>& region) const override;

private:
    std::vector<TextUnit> units_;  // sorted by (line, offset)
};

/// Reads the "units" array of a ground-truth JSON file (OracleLoadError when
/// missing or malformed).
std::unique_ptr<StubOcr> stub_ocr(const std::string& sidecar_path);
std::vector<TextUnit> parse_text_units(const std::string& json_text);

/// File-exchange adapter: one UTF-8 line per text line, returned for any
/// region.
class SidecarTextOcr final : public OcrBackend {
public:
    explicit SidecarTextOcr(std::string text);
    std::vector<OcrLine> recognize(const GrayImage& img, const std::optional<BBox>& region) const override;

private:
    std::vector<OcrLine> lines_;
};

std::unique_ptr<SidecarTextOcr> sidecar_text_ocr(const std::string& path);

/// Look-alike pairs between digits and letters. Applying either direction
/// replaces one byte by one byte.
class ConfusionTable {
public:
    ConfusionTable(std::map<char, char> letter_to_digit, std::map<char, char> digit_to_letter);

    /// I/l->1, O/o->0, S->5, B->8 and 1->I, 0->O, 5->S, 8->B.
    static const ConfusionTable& standard();

    std::optional<char> to_digit(char c) const;
    std::optional<char> to_letter(char c) const;
    /// Either direction, for noise injection.
    std::optional<char> swap(char c) const;

private:
    std::map<char, char> letter_to_digit_;
    std::map<char, char> digit_to_letter_;
};

enum NoiseOp : unsigned {
    kNoiseSwap = 1u,
    kNoiseDelete = 2u,
    kNoiseInsertSpace = 4u,
    kNoiseAll = 7u,
};

struct NoiseStats {
    std::size_t characters = 0;
    std::size_t events = 0;
};

/// Per character (UTF-8 sequence), with probability `rate`, applies one of the
/// enabled operations that is applicable to it, chosen uniformly. A space is
/// inserted before the character.
std::string inject_noise(std::string_view text, double rate, std::uint64_t seed,
                         const ConfusionTable& table = ConfusionTable::standard(), unsigned ops = kNoiseAll,
                         NoiseStats* stats = nullptr);

/// Seed for one line of one OCR call, mixed from the backend seed, the
/// region and the line index.
std::uint64_t noise_seed(std::uint64_t seed, const std::optional<BBox>& region, std::size_t line);

class NoisyOcr final : public OcrBackend {
public:
    /// rate in [0, 1] (ConfigError otherwise).
    NoisyOcr(std::shared_ptr<const OcrBackend> inner, double rate, std::uint64_t seed,
             ConfusionTable table = ConfusionTable::standard(), unsigned ops = kNoiseAll);
    std::vector<OcrLine> recognize(const GrayImage& img, const std::optional<BBox>& region) const override;

private:
    std::shared_ptr<const OcrBackend> inner_;
    double rate_;
    std::uint64_t seed_;
    ConfusionTable table_;
    unsigned ops_;
};

std::shared_ptr<NoisyOcr> noisy_ocr(std::shared_ptr<const OcrBackend> inner, double rate, std::uint64_t seed);

/// Price token: digits with an optional one- or two-digit decimal part after
/// '.' or ',', and an optional currency (EUR, €, $, £) before or after.
bool is_price_token(std::string_view token);

enum class RepairContext { PriceColumn, FreeText };

/// In price columns, each whitespace-separated token holding a genuine digit
/// and a majority of digits plus look-alikes is mapped to digits; the repair
/// is kept only when the token then reads as a price. Whitespace is kept.
std::string repair_numeric(std::string_view text, RepairContext context,
                           const ConfusionTable& table = ConfusionTable::standard());

}  // namespace receiptforge
