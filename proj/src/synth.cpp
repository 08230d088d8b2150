#include "receiptforge/synth.hpp"

#include "receiptforge/error.hpp"
#include "receiptforge/font.hpp"

#include <json.hpp>

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

namespace receiptforge {

using json = nlohmann::json;
namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Randomness

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
    std::uint64_t x = a ^ (b + 0x9E3779B97F4A7C15ull + (a << 6) + (a >> 2));
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

double unit_uniform(std::uint64_t& state) {
    state += 0x9E3779B97F4A7C15ull;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    z ^= z >> 31;
    return static_cast<double>(z >> 11) * 0x1.0p-53;
}

namespace {

class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    double uniform() { return unit_uniform(state_); }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    /// Integer in [lo, hi].
    int integer(int lo, int hi) {
        return lo + std::min(hi - lo, static_cast<int>(uniform() * (hi - lo + 1)));
    }
    bool chance(double p) { return uniform() < p; }
    std::uint64_t bits() {
        uniform();
        return mix_seed(state_, 0x51u);
    }

private:
    std::uint64_t state_;
};

// Standard normal samples drawn once; pixel noise indexes into them.
const std::array<double, 4096>& normal_table() {
    static const std::array<double, 4096> table = [] {
        std::array<double, 4096> t{};
        Rng rng(0xC0FFEEull);
        for (std::size_t i = 0; i < t.size(); i += 2) {
            const double u1 = std::max(rng.uniform(), 1e-300);
            const double u2 = rng.uniform();
            const double r = std::sqrt(-2.0 * std::log(u1));
            t[i] = r * std::cos(2.0 * M_PI * u2);
            t[i + 1] = r * std::sin(2.0 * M_PI * u2);
        }
        return t;
    }();
    return table;
}

std::uint8_t clamp_u8(double v) { return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L)); }

// ---------------------------------------------------------------------------
// Fixed text assets

constexpr std::string_view kAbbreviations =
    "# abbreviation\texpansion\n"
    "NAT\tNATURE\n"
    "YAO\tYAOURT\n"
    "YRT\tYAOURT\n"
    "FROM\tFROMAGE\n"
    "FRO\tFROMAGE\n"
    "JB\tJAMBON\n"
    "JAMB\tJAMBON\n"
    "BEUR\tBEURRE\n"
    "CHOC\tCHOCOLAT\n"
    "CHOCO\tCHOCOLAT\n"
    "BISC\tBISCUITS\n"
    "BISCT\tBISCUITS\n"
    "CER\tCEREALES\n"
    "CONF\tCONFITURE\n"
    "COMP\tCOMPOTE\n"
    "POUL\tPOULET\n"
    "SAUM\tSAUMON\n"
    "TOM\tTOMATES\n"
    "POM\tPOMMES\n"
    "CR\tCREME\n"
    "FAR\tFARINE\n"
    "SAL\tSALADE\n"
    "SOUP\tSOUPE\n"
    "ALL\tALLEGE\n"
    "ALLG\tALLEGE\n"
    "ENT\tENTIER\n"
    "VAN\tVANILLE\n"
    "VANIL\tVANILLE\n"
    "FRS\tFRAIS\n"
    "FAM\tFAMILIAL\n"
    "FAMIL\tFAMILIAL\n"
    "EXT\tEXTRA\n"
    "PT\tPETIT\n"
    "GD\tGRAND\n"
    "BTE\tBOITE\n"
    "BTL\tBOUTEILLE\n"
    "PQT\tPAQUET\n"
    "SACH\tSACHET\n"
    "BQT\tBARQUETTE\n"
    "LEG\tLEGUMES\n"
    "FRT\tFRUITS\n"
    "VIAN\tVIANDE\n"
    "ECR\tECREME\n"
    "S/S\tSANS SUCRE\n"
    "PDT\tPRODUIT\n"
    "ASS\tASSORTIS\n"
    "MOY\tMOYEN\n"
    "BLC\tBLANC\n"
    "RGE\tROUGE\n"
    "SURG\tSURGELE\n"
    "CHOCOL\tCHOCOLAT\n"
    "CEREAL\tCEREALES\n";

constexpr std::array<std::string_view, 25> kNouns = {
    "YAOURT", "FROMAGE", "JAMBON",   "BEURRE", "LAIT",   "CAFE",    "THE",    "CHOCOLAT", "BISCUITS",
    "CEREALES", "CONFITURE", "COMPOTE", "JUS", "PAIN",  "POULET",  "SAUMON", "PATES",    "RIZ",
    "SOUPE",  "SALADE",  "TOMATES",  "POMMES", "CREME", "MIEL",    "FARINE"};

constexpr std::array<std::string_view, 8> kQualifiers = {"NATURE", "BIO",   "ALLEGE", "ENTIER",
                                                         "VANILLE", "FRAIS", "EXTRA",  "FAMILIAL"};

struct StoreText {
    std::string_view name;
    std::string_view slogan;
    std::string_view loyalty;
    std::string_view street;
    std::string_view city;
};

constexpr std::array<StoreText, 10> kStores = {{
    {"MARCHE DU PORT", "LE FRAIS A PRIX DOUX", "CARTE FIDELITE PORT PLUS", "4 QUAI DES PECHEURS", "56100 LORIENT"},
    {"EPICERIE LUMIERE", "LA LUMIERE DU GOUT", "CLUB LUMIERE AVANTAGES", "18 RUE DES LILAS", "74000 ANNECY"},
    {"SUPER BELLEVUE", "BELLEVUE VOUS DIT MERCI", "PASS BELLEVUE FIDELITE", "2 AVENUE DU LAC", "73100 AIX"},
    {"CASA FRAICHE", "FRAICHEUR MAISON CHAQUE JOUR", "CARTE CASA PRIVILEGE", "9 PLACE CARNOT", "69002 LYON"},
    {"PRIMEUR DES ALPES", "DES ALPES A VOTRE TABLE", "CLUB ALPIN PRIMEUR", "31 ROUTE DE GENEVE", "74100 ANNEMASSE"},
    {"HALLE AUX GRAINS", "LE GRAIN DE LA QUALITE", "CARNET GRAINS D OR", "7 RUE DU MOULIN", "41000 BLOIS"},
    {"BIO CLAIRIERE", "LA NATURE EN CLAIRIERE", "CERCLE VERT CLAIRIERE", "22 CHEMIN DES BOIS", "38000 GRENOBLE"},
    {"MAXI SAVEURS", "MAXI CHOIX MINI PRIX", "MAXI CARTE AVANTAGE", "140 BD DE L OUEST", "44000 NANTES"},
    {"COMPTOIR OCEAN", "LA MER A DEUX PAS", "CLUB OCEAN BLEU", "3 PROMENADE DU PORT", "17000 LA ROCHELLE"},
    {"DOUCE FERME", "LA FERME EN VILLE", "CARTE DOUCE FIDELE", "15 RUE DE LA GARE", "21000 DIJON"},
}};

constexpr std::array<std::string_view, 8> kFlyerLines = {
    "GRANDE BRADERIE", "SAMEDI ET DIMANCHE", "ENTREE LIBRE",   "PLACE DU MARCHE",
    "CONCERT EN PLEIN AIR", "VENEZ NOMBREUX", "BUVETTE SUR PLACE", "ANIMATIONS POUR ENFANTS"};

// ---------------------------------------------------------------------------
// Receipt geometry

constexpr int kScale = 2;
constexpr int kColumns = 32;
constexpr int kMargin = 16;
constexpr int kPitch = 20;
constexpr int kCharAdvance = font::kAdvance * kScale;
constexpr int kReceiptWidth = kColumns * kCharAdvance + 2 * kMargin;
constexpr double kLogoFill = 0.8;
constexpr double kLongAspect = 3.0;
constexpr double kShortAspect = 1.5;

std::string format_phone(const std::string& digits) {
    std::string out;
    for (std::size_t i = 0; i < digits.size(); ++i) {
        if (i > 0 && i % 2 == 0) out += ' ';
        out += digits[i];
    }
    return out;
}

std::string format_price(std::int64_t cents, int style) {
    const std::string units = std::to_string(cents / 100);
    const std::string frac{static_cast<char>('0' + cents % 100 / 10), static_cast<char>('0' + cents % 10)};
    switch (style) {
    case 0: return units + "," + frac;
    case 1: return units + "." + frac + "€";
    default: return units + "," + frac + " EUR";
    }
}

GrayImage make_logo(Rng& rng, LogoAspect aspect) {
    const int cols = aspect == LogoAspect::Long ? 8 : 6;
    const int rows = aspect == LogoAspect::Long ? 3 : 4;
    const int width = static_cast<int>(std::lround(kLogoFill * kReceiptWidth));
    const int height =
        static_cast<int>(std::lround(width / (aspect == LogoAspect::Long ? kLongAspect : kShortAspect)));
    std::vector<int> cells(static_cast<std::size_t>(cols * rows));
    for (;;) {
        int filled = 0;
        for (auto& c : cells) {
            c = rng.chance(0.5) ? 1 : 0;
            filled += c;
        }
        const auto at = [&](int r, int c) { return cells[static_cast<std::size_t>(r * cols + c)]; };
        bool borders = true;
        for (int r : {0, rows - 1}) {
            int s = 0;
            for (int c = 0; c < cols; ++c) s += at(r, c);
            borders = borders && s > 0;
        }
        for (int c : {0, cols - 1}) {
            int s = 0;
            for (int r = 0; r < rows; ++r) s += at(r, c);
            borders = borders && s > 0;
        }
        const int total = static_cast<int>(cells.size());
        if (borders && 3 * filled >= total && 3 * filled <= 2 * total) break;
    }
    GrayImage img(width, height, 255);
    for (int y = 0; y < height; ++y) {
        const int r = std::min(rows - 1, y * rows / height);
        for (int x = 0; x < width; ++x) {
            const int c = std::min(cols - 1, x * cols / width);
            if (cells[static_cast<std::size_t>(r * cols + c)]) img.at(x, y) = 20;
        }
    }
    return img;
}

// Upright receipt raster plus its text geometry.
struct ReceiptRaster {
    GrayImage image;
    std::vector<GtLine> lines;
    std::vector<TextUnit> units;
    std::vector<GtProduct> products;
    std::optional<BBox> logo_box;
};

class ReceiptWriter {
public:
    ReceiptWriter(std::uint8_t paper, std::uint8_t ink) : paper_(paper), ink_(ink) {}

    void logo(const GrayImage& raster) {
        logo_ = raster;
        logo_box_ = BBox{double((kReceiptWidth - raster.width()) / 2), double(y_), double(raster.width()),
                         double(raster.height())};
        y_ += raster.height() + kPitch;
    }

    void centered(const std::string& text, const std::string& role) {
        const int n = font::text_length(text);
        const int x = (kReceiptWidth - (n * kCharAdvance - kScale)) / 2;
        add_line(text, role, {{0, text, x}});
    }

    /// Label at the left margin, price right-aligned; returns the line index.
    int item(const std::string& label, const std::string& price, const std::string& role) {
        const int price_chars = font::text_length(price);
        const int price_col = kColumns - price_chars;
        const int label_chars = font::text_length(label);
        if (label_chars + 2 > price_col) throw Error(ErrorCode::AssetError, "label too long: " + label);
        const std::string gap(static_cast<std::size_t>(price_col - label_chars), ' ');
        add_line(label + gap + price, role,
                 {{0, label, kMargin}, {static_cast<int>(label.size() + gap.size()), price, kMargin + price_col * kCharAdvance}});
        return static_cast<int>(lines_.size()) - 1;
    }

    void blank() { y_ += kPitch; }

    void product(int line, GtProduct p) {
        p.line = line;
        products_.push_back(std::move(p));
    }

    ReceiptRaster finish() {
        const int height = y_ - (kPitch - font::kGlyphHeight * kScale) + kMargin;
        ReceiptRaster out;
        out.image = GrayImage(kReceiptWidth, height, paper_);
        if (logo_box_) {
            for (int y = 0; y < logo_.height(); ++y) {
                for (int x = 0; x < logo_.width(); ++x) {
                    if (logo_.at(x, y) < 128) {
                        out.image.at(static_cast<int>(logo_box_->x) + x, static_cast<int>(logo_box_->y) + y) = ink_;
                    }
                }
            }
        }
        for (const auto& d : draws_) font::draw_text(out.image, d.x, d.y, d.text, kScale, ink_);
        out.lines = std::move(lines_);
        out.units = std::move(units_);
        out.products = std::move(products_);
        out.logo_box = logo_box_;
        return out;
    }

private:
    struct Piece {
        int offset;
        std::string text;
        int x;
    };
    struct Draw {
        int x;
        int y;
        std::string text;
    };

    void add_line(const std::string& text, const std::string& role, const std::vector<Piece>& pieces) {
        const int line = static_cast<int>(lines_.size());
        BBox box{};
        for (std::size_t i = 0; i < pieces.size(); ++i) {
            const auto& p = pieces[i];
            const BBox b = font::text_box(p.x, y_, p.text, kScale);
            box = i == 0 ? b : unite(box, b);
            units_.push_back({line, p.offset, p.text, b});
            draws_.push_back({p.x, y_, p.text});
        }
        lines_.push_back({text, box, role});
        y_ += kPitch;
    }

    std::uint8_t paper_;
    std::uint8_t ink_;
    int y_ = kMargin;
    GrayImage logo_;
    std::optional<BBox> logo_box_;
    std::vector<Draw> draws_;
    std::vector<GtLine> lines_;
    std::vector<TextUnit> units_;
    std::vector<GtProduct> products_;
};

// Printed label for an ontology term: some tokens abbreviated.
std::string print_label(const std::string& term, const std::map<std::string, std::string>& short_forms, Rng& rng) {
    std::istringstream in(term);
    std::string tok, out;
    while (in >> tok) {
        const auto it = short_forms.find(tok);
        if (it != short_forms.end() && rng.chance(0.5)) tok = it->second;
        if (!out.empty()) out += ' ';
        out += tok;
    }
    return out;
}

ReceiptRaster render_receipt(const SyntheticSpec& spec, const SynthAssets& assets, const StoreRecord& store,
                             std::size_t store_index, Rng& rng) {
    const bool low = spec.degradation == Degradation::LowContrast;
    const std::uint8_t paper = low ? clamp_u8(rng.uniform(160, 180)) : clamp_u8(rng.uniform(236, 250));
    const std::uint8_t ink = low ? clamp_u8(rng.uniform(70, 90)) : clamp_u8(rng.uniform(15, 45));
    ReceiptWriter w(paper, ink);

    if (spec.logo != LogoPlacement::None) {
        const auto logo = std::find_if(assets.logos.begin(), assets.logos.end(),
                                       [&](const auto& t) { return t.label == store.store_id; });
        if (logo == assets.logos.end() || logo->images.empty()) {
            throw Error(ErrorCode::AssetError, "no logo for store " + store.store_id);
        }
        w.logo(logo->images.front());
    }

    const std::string name = store.name_variants.front();
    w.centered(name, "header");
    const std::string address = store_index < assets.addresses.size() ? assets.addresses[store_index] : "";
    std::istringstream addr(address);
    std::string part;
    while (std::getline(addr, part, '|')) w.centered(part, "header");
    w.centered("TEL " + format_phone(store.phone_numbers.front()), "header");
    w.blank();

    // reverse abbreviation table: expansion -> shortest abbreviation
    std::map<std::string, std::string> short_forms;
    for (const auto& [abbr, full] : assets.ontology.abbreviations()) {
        if (full.find(' ') != std::string::npos) continue;
        const auto it = short_forms.find(full);
        if (it == short_forms.end() || abbr.size() < it->second.size()) short_forms[full] = abbr;
    }

    const int style = rng.integer(0, 2);
    std::int64_t total = 0;
    const auto& concepts = assets.ontology.concepts();
    for (int i = 0; i < spec.product_count; ++i) {
        const auto& c = concepts[static_cast<std::size_t>(rng.integer(0, static_cast<int>(concepts.size()) - 1))];
        const std::string& term = c.terms.front();
        std::string label = print_label(term, short_forms, rng);
        int quantity = 1;
        if (rng.chance(0.15)) {
            quantity = rng.integer(2, 4);
            label = std::to_string(quantity) + " x " + label;
        }
        const std::int64_t unit = rng.integer(35, 1299);
        std::int64_t price = unit * quantity;
        if (font::text_length(label) + 2 + font::text_length(format_price(price, style)) > kColumns) {
            label = label.substr(label.find(" x ") + 3);
            quantity = 1;
            price = unit;
        }
        total += price;
        const int line = w.item(label, format_price(price, style), "product");
        GtProduct p;
        p.label = quantity > 1 ? label.substr(label.find(" x ") + 3) : label;
        p.concept_id = c.concept_id;
        p.quantity = quantity;
        p.price_cents = price;
        w.product(line, std::move(p));
    }
    w.blank();
    w.item("TOTAL", format_price(total, style), "total");
    w.item("CB", format_price(total, style), "total");
    w.blank();
    for (const auto& t : store.terminology) w.centered(t, "footer");
    w.centered("A BIENTOT CHEZ " + name, "footer");
    if (store.phone_numbers.size() > 1) w.centered("SERVICE CLIENT " + format_phone(store.phone_numbers[1]), "footer");
    return w.finish();
}

// ---------------------------------------------------------------------------
// Backgrounds

GrayImage smooth_field(int width, int height, Rng& rng, double base, double amplitude) {
    constexpr int kCell = 32;
    const int gw = width / kCell + 2;
    const int gh = height / kCell + 2;
    std::vector<double> coarse(static_cast<std::size_t>(gw * gh), base);
    const int blobs = rng.integer(3, 6);
    for (int b = 0; b < blobs; ++b) {
        const double cx = rng.uniform(0, gw), cy = rng.uniform(0, gh);
        const double r = rng.uniform(3, 9);
        const double a = rng.uniform(-amplitude, amplitude);
        for (int y = 0; y < gh; ++y) {
            for (int x = 0; x < gw; ++x) {
                const double d2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
                coarse[static_cast<std::size_t>(y * gw + x)] += a * std::exp(-d2 / (2 * r * r));
            }
        }
    }
    GrayImage img(width, height);
    for (int y = 0; y < height; ++y) {
        const double fy = static_cast<double>(y) / kCell;
        const int y0 = static_cast<int>(fy);
        const double ty = fy - y0;
        for (int x = 0; x < width; ++x) {
            const double fx = static_cast<double>(x) / kCell;
            const int x0 = static_cast<int>(fx);
            const double tx = fx - x0;
            const auto c = [&](int xx, int yy) { return coarse[static_cast<std::size_t>(yy * gw + xx)]; };
            const double v = (1 - ty) * ((1 - tx) * c(x0, y0) + tx * c(x0 + 1, y0)) +
                             ty * ((1 - tx) * c(x0, y0 + 1) + tx * c(x0 + 1, y0 + 1));
            img.at(x, y) = clamp_u8(v);
        }
    }
    return img;
}

void fill_rect(GrayImage& img, int x, int y, int w, int h, std::uint8_t v) {
    for (int yy = std::max(0, y); yy < std::min(img.height(), y + h); ++yy) {
        for (int xx = std::max(0, x); xx < std::min(img.width(), x + w); ++xx) img.at(xx, yy) = v;
    }
}

GrayImage make_background(Background kind, int width, int height, int band, Rng& rng) {
    switch (kind) {
    case Background::Plain: return GrayImage(width, height, clamp_u8(rng.uniform(60, 110)));
    case Background::Textured: return smooth_field(width, height, rng, rng.uniform(75, 105), 30.0);
    case Background::PhotoTile: {
        GrayImage img = smooth_field(width, height, rng, rng.uniform(55, 85), 12.0);
        // bright tiles along both sides, far from the centre
        for (const bool left : {true, false}) {
            const int tiles = rng.integer(1, 2);
            int x = left ? rng.integer(10, 30) : width - rng.integer(10, 30);
            for (int t = 0; t < tiles; ++t) {
                const int w = rng.integer(40, 60);
                const int tx = left ? x : x - w;
                fill_rect(img, tx, 0, w, height, clamp_u8(rng.uniform(150, 190)));
                x = left ? x + w + rng.integer(8, 16) : x - w - rng.integer(8, 16);
                if ((left && x > band - 60) || (!left && x < width - band + 60)) break;
            }
        }
        return img;
    }
    }
    return GrayImage(width, height, 80);
}

// Draws `raster` rotated by `angle_deg` (clockwise) with its centre at
// (cx, cy), with anti-aliased borders.
void composite(GrayImage& dst, const GrayImage& raster, double angle_deg, double cx, double cy) {
    const double t = angle_deg * M_PI / 180.0;
    const double c = std::cos(t), s = std::sin(t);
    const double w = raster.width(), h = raster.height();
    const double hw = w / 2, hh = h / 2;
    const double ex = std::abs(c) * hw + std::abs(s) * hh + 2;
    const double ey = std::abs(s) * hw + std::abs(c) * hh + 2;
    const int x0 = std::max(0, static_cast<int>(std::floor(cx - ex)));
    const int x1 = std::min(dst.width(), static_cast<int>(std::ceil(cx + ex)));
    const int y0 = std::max(0, static_cast<int>(std::floor(cy - ey)));
    const int y1 = std::min(dst.height(), static_cast<int>(std::ceil(cy + ey)));
    const auto sample = [&](double u, double v) {
        const double fu = std::clamp(u - 0.5, 0.0, w - 1.0), fv = std::clamp(v - 0.5, 0.0, h - 1.0);
        const int iu = static_cast<int>(fu), iv = static_cast<int>(fv);
        const double tu = fu - iu, tv = fv - iv;
        const int iu1 = std::min(iu + 1, raster.width() - 1), iv1 = std::min(iv + 1, raster.height() - 1);
        return (1 - tv) * ((1 - tu) * raster.at(iu, iv) + tu * raster.at(iu1, iv)) +
               tv * ((1 - tu) * raster.at(iu, iv1) + tu * raster.at(iu1, iv1));
    };
    for (int y = y0; y < y1; ++y) {
        for (int x = x0; x < x1; ++x) {
            const double px = x + 0.5 - cx, py = y + 0.5 - cy;
            // inverse rotation
            const double u = c * px + s * py + hw;
            const double v = -s * px + c * py + hh;
            const double cover = std::clamp(std::min({u, w - u, v, h - v}) + 0.5, 0.0, 1.0);
            if (cover <= 0.0) continue;
            const double val = cover * sample(u, v) + (1 - cover) * dst.at(x, y);
            dst.at(x, y) = clamp_u8(val);
        }
    }
}

void add_noise(GrayImage& img, double sigma, Rng& rng) {
    if (sigma <= 0.0) return;
    const auto& table = normal_table();
    std::uint64_t state = rng.bits();
    for (int y = 0; y < img.height(); ++y) {
        for (int x = 0; x < img.width(); ++x) {
            state = state * 6364136223846793005ull + 1442695040888963407ull;
            const double n = table[(state >> 52) & 4095];
            img.at(x, y) = clamp_u8(img.at(x, y) + sigma * n);
        }
    }
}

std::string noisy_page(const std::vector<GtLine>& lines, double rate, std::uint64_t seed) {
    std::string out;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (i) out += '\n';
        out += rate > 0.0 ? inject_noise(lines[i].text, rate, mix_seed(seed, i)) : lines[i].text;
    }
    return out;
}

json box_json(const BBox& b) { return json::array({b.x, b.y, b.w, b.h}); }

BBox box_from(const json& j) {
    const auto v = j.get<std::vector<double>>();
    if (v.size() != 4) throw Error(ErrorCode::OracleLoadError, "box must have 4 numbers");
    return {v[0], v[1], v[2], v[3]};
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
    out << text;
}

// Receipt share of each heat-map window, sampled on an 8x8 grid.
HeatMap oracle_heatmap(const GroundTruth& gt, int input, int stride) {
    const int gw = grid_extent(gt.image_width, input, stride);
    const int gh = grid_extent(gt.image_height, input, stride);
    const auto inside = [&](double x, double y) {
        for (int k = 0; k < 4; ++k) {
            const auto& a = gt.quad.corners[static_cast<std::size_t>(k)];
            const auto& b = gt.quad.corners[static_cast<std::size_t>((k + 1) % 4)];
            if ((b.x - a.x) * (y - a.y) - (b.y - a.y) * (x - a.x) < 0) return false;
        }
        return true;
    };
    std::vector<double> scores;
    for (int i = 0; i < gh; ++i) {
        for (int j = 0; j < gw; ++j) {
            int hits = 0;
            for (int sy = 0; sy < 8; ++sy) {
                for (int sx = 0; sx < 8; ++sx) {
                    hits += inside(j * stride + (sx + 0.5) * input / 8.0, i * stride + (sy + 0.5) * input / 8.0);
                }
            }
            const double s = gt.receipt_present && hits >= 32 ? 0.95 : 0.05;
            scores.push_back(s);
            scores.push_back(1.0 - s);
        }
    }
    return HeatMap(gw, gh, stride, input, {"receipt", "not_receipt"}, std::move(scores));
}

}  // namespace

// ---------------------------------------------------------------------------
// Enumerations

std::string_view to_string(Background b) {
    switch (b) {
    case Background::Plain: return "plain";
    case Background::Textured: return "textured";
    case Background::PhotoTile: return "photo-tile";
    }
    return "plain";
}

std::string_view to_string(LogoPlacement p) {
    switch (p) {
    case LogoPlacement::Top: return "top";
    case LogoPlacement::BottomInverted: return "bottom-inverted";
    case LogoPlacement::None: return "none";
    }
    return "none";
}

std::string_view to_string(Degradation d) {
    switch (d) {
    case Degradation::None: return "none";
    case Degradation::OcrMiss: return "ocr_miss";
    case Degradation::LowContrast: return "low_contrast";
    }
    return "none";
}

Background parse_background(std::string_view s) {
    if (s == "plain") return Background::Plain;
    if (s == "textured") return Background::Textured;
    if (s == "photo-tile") return Background::PhotoTile;
    throw Error(ErrorCode::ConfigError, "unknown background '" + std::string(s) + "'");
}

LogoPlacement parse_logo_placement(std::string_view s) {
    if (s == "top") return LogoPlacement::Top;
    if (s == "bottom-inverted") return LogoPlacement::BottomInverted;
    if (s == "none") return LogoPlacement::None;
    throw Error(ErrorCode::ConfigError, "unknown logo placement '" + std::string(s) + "'");
}

Degradation parse_degradation(std::string_view s) {
    if (s == "none") return Degradation::None;
    if (s == "ocr_miss") return Degradation::OcrMiss;
    if (s == "low_contrast") return Degradation::LowContrast;
    throw Error(ErrorCode::ConfigError, "unknown degradation '" + std::string(s) + "'");
}

// ---------------------------------------------------------------------------
// Ground truth

std::string GroundTruth::text() const {
    std::string out;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (i) out += '\n';
        out += lines[i].text;
    }
    return out;
}

std::string ground_truth_to_json(const GroundTruth& gt) {
    json quad = json::array();
    for (const auto& p : gt.quad.corners) quad.push_back({p.x, p.y});
    json lines = json::array();
    for (const auto& l : gt.lines) lines.push_back({{"text", l.text}, {"box", box_json(l.box)}, {"role", l.role}});
    json units = json::array();
    for (const auto& u : gt.units) {
        units.push_back({{"line", u.line}, {"offset", u.offset}, {"text", u.text}, {"box", box_json(u.box)}});
    }
    json products = json::array();
    for (const auto& p : gt.products) {
        products.push_back({{"line", p.line},
                            {"label", p.label},
                            {"concept_id", p.concept_id},
                            {"quantity", p.quantity},
                            {"price_cents", p.price_cents}});
    }
    json doc{{"schema", "groundtruth-v1"},
             {"sample_id", gt.sample_id},
             {"receipt_present", gt.receipt_present},
             {"store_id", gt.store_id},
             {"quad", quad},
             {"image_size", {gt.image_width, gt.image_height}},
             {"receipt_size", {gt.receipt_width, gt.receipt_height}},
             {"rotation_deg", gt.rotation_deg},
             {"background", to_string(gt.background)},
             {"logo", to_string(gt.logo)},
             {"logo_box", gt.logo_box ? box_json(*gt.logo_box) : json(nullptr)},
             {"degradation", to_string(gt.degradation)},
             {"lines", lines},
             {"units", units},
             {"products", products}};
    return doc.dump(1);
}

GroundTruth parse_ground_truth(const std::string& json_text) {
    GroundTruth gt;
    try {
        const auto doc = json::parse(json_text);
        gt.sample_id = doc.at("sample_id").get<std::string>();
        gt.receipt_present = doc.at("receipt_present").get<bool>();
        gt.store_id = doc.value("store_id", "");
        const auto& quad = doc.at("quad");
        for (std::size_t k = 0; k < 4 && k < quad.size(); ++k) {
            gt.quad.corners[k] = {quad[k][0].get<double>(), quad[k][1].get<double>()};
        }
        gt.image_width = doc.at("image_size")[0].get<int>();
        gt.image_height = doc.at("image_size")[1].get<int>();
        gt.receipt_width = doc.at("receipt_size")[0].get<int>();
        gt.receipt_height = doc.at("receipt_size")[1].get<int>();
        gt.rotation_deg = doc.at("rotation_deg").get<double>();
        gt.background = parse_background(doc.at("background").get<std::string>());
        gt.logo = parse_logo_placement(doc.at("logo").get<std::string>());
        if (!doc.at("logo_box").is_null()) gt.logo_box = box_from(doc.at("logo_box"));
        gt.degradation = parse_degradation(doc.at("degradation").get<std::string>());
        for (const auto& l : doc.at("lines")) {
            gt.lines.push_back({l.at("text").get<std::string>(), box_from(l.at("box")), l.at("role").get<std::string>()});
        }
        gt.units = parse_text_units(json_text);
        for (const auto& p : doc.at("products")) {
            gt.products.push_back({p.at("line").get<int>(), p.at("label").get<std::string>(),
                                   p.at("concept_id").get<std::string>(), p.at("quantity").get<int>(),
                                   p.at("price_cents").get<std::int64_t>()});
        }
    } catch (const json::exception& e) {
        throw Error(ErrorCode::OracleLoadError, std::string("malformed ground truth: ") + e.what());
    }
    return gt;
}

GroundTruth load_ground_truth(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::OracleLoadError, "cannot open ground truth " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_ground_truth(buf.str());
}

// ---------------------------------------------------------------------------
// Assets

std::string_view default_abbreviations_tsv() { return kAbbreviations; }

Ontology default_ontology() {
    std::vector<Category> categories;
    std::vector<Concept> concepts;
    for (std::size_t n = 0; n < kNouns.size(); ++n) {
        char cat[16];
        std::snprintf(cat, sizeof(cat), "K%02zu", n + 1);
        categories.push_back({cat, std::string(kNouns[n])});
        for (std::size_t q = 0; q < kQualifiers.size(); ++q) {
            char id[16];
            std::snprintf(id, sizeof(id), "C%03zu", n * kQualifiers.size() + q + 1);
            const std::string term = std::string(kNouns[n]) + " " + std::string(kQualifiers[q]);
            concepts.push_back({id, cat, term, {term}});
        }
    }
    return Ontology(std::move(categories), std::move(concepts), parse_abbreviations(std::string(kAbbreviations)));
}

SynthAssets default_assets(std::uint64_t seed, int store_count) {
    if (store_count < 1 || store_count > static_cast<int>(kStores.size())) {
        throw Error(ErrorCode::AssetError, "store count must lie in [1, 10]");
    }
    Rng rng(mix_seed(seed, 0xA55E7ull));
    std::vector<StoreRecord> records;
    SynthAssets assets;
    std::vector<std::string> used_phones;
    for (int i = 0; i < store_count; ++i) {
        const auto& t = kStores[static_cast<std::size_t>(i)];
        StoreRecord r;
        char id[16];
        std::snprintf(id, sizeof(id), "S%02d", i + 1);
        r.store_id = id;
        r.display_name = std::string(t.name);
        r.name_variants = {std::string(t.name)};
        for (int k = 0; k < 2; ++k) {
            std::string phone;
            do {
                phone = "0" + std::to_string(rng.integer(1, 5));
                for (int d = 0; d < 8; ++d) phone += static_cast<char>('0' + rng.integer(0, 9));
            } while (std::find(used_phones.begin(), used_phones.end(), phone) != used_phones.end());
            used_phones.push_back(phone);
            r.phone_numbers.push_back(phone);
        }
        r.terminology = {std::string(t.slogan), std::string(t.loyalty)};
        r.logo_aspect = i % 2 == 0 ? LogoAspect::Long : LogoAspect::Short;
        assets.logos.push_back({r.store_id, {make_logo(rng, r.logo_aspect)}});
        assets.addresses.push_back(std::string(t.street) + "|" + std::string(t.city));
        records.push_back(std::move(r));
    }
    assets.stores = StoreDb(std::move(records));
    assets.ontology = default_ontology();
    return assets;
}

// ---------------------------------------------------------------------------
// Rendering

RenderedSample generate(const SyntheticSpec& spec, const SynthAssets& assets) {
    Rng rng(spec.seed);
    RenderedSample out;
    GroundTruth& gt = out.truth;
    gt.sample_id = spec.sample_id;
    gt.receipt_present = spec.receipt;
    gt.rotation_deg = spec.rotation_deg;
    gt.background = spec.background;
    gt.degradation = spec.degradation;

    if (!spec.receipt) {
        const int width = rng.integer(700, 900);
        const int height = rng.integer(900, 1200);
        gt.image_width = width;
        gt.image_height = height;
        out.image = make_background(spec.background, width, height, width / 4, rng);
        if (spec.flyer) {
            const int fw = rng.integer(420, 520), fh = rng.integer(420, 560);
            GrayImage sheet(fw, fh, clamp_u8(rng.uniform(225, 245)));
            std::vector<GtLine> lines;
            int y = 30;
            for (int k = 0; k < 5 && y + 21 < fh - 20; ++k) {
                const std::string text(kFlyerLines[static_cast<std::size_t>(rng.integer(0, 7))]);
                font::draw_text(sheet, 20, y, text, 3, 30);
                lines.push_back({text, font::text_box(20, y, text, 3), "flyer"});
                y += rng.integer(50, 90);
            }
            composite(out.image, sheet, spec.rotation_deg, width / 2.0, height / 2.0);
            out.ocr_text = noisy_page(lines, spec.ocr_noise, mix_seed(spec.seed, 0x0C7ull));
        }
        add_noise(out.image, spec.noise_sigma, rng);
        return out;
    }

    const StoreRecord* store = assets.stores.find(spec.store_id);
    if (!store) throw Error(ErrorCode::AssetError, "unknown store '" + spec.store_id + "'");
    const std::size_t store_index = static_cast<std::size_t>(store - assets.stores.stores().data());
    ReceiptRaster receipt = render_receipt(spec, assets, *store, store_index, rng);
    gt.store_id = spec.store_id;
    gt.receipt_width = receipt.image.width();
    gt.receipt_height = receipt.image.height();
    gt.logo = spec.logo;
    gt.logo_box = receipt.logo_box;
    gt.lines = receipt.lines;
    gt.units = receipt.units;
    gt.products = receipt.products;

    const double t = spec.rotation_deg * M_PI / 180.0;
    const double c = std::cos(t), s = std::sin(t);
    const double rw = gt.receipt_width * std::abs(c) + gt.receipt_height * std::abs(s);
    const double rh = gt.receipt_width * std::abs(s) + gt.receipt_height * std::abs(c);
    const int mx = rng.integer(100, 160), my = rng.integer(100, 160);
    const int band = spec.background == Background::PhotoTile ? 300 : 0;
    gt.image_width = static_cast<int>(std::ceil(rw)) + 2 * (mx + band);
    gt.image_height = static_cast<int>(std::ceil(rh)) + 2 * my;
    out.image = make_background(spec.background, gt.image_width, gt.image_height, band, rng);

    const double cx = gt.image_width / 2.0 + rng.uniform(-8, 8);
    const double cy = gt.image_height / 2.0 + rng.uniform(-8, 8);
    const GrayImage raster = spec.logo == LogoPlacement::BottomInverted ? flip180(receipt.image) : receipt.image;
    composite(out.image, raster, spec.rotation_deg, cx, cy);
    add_noise(out.image, spec.noise_sigma, rng);

    const double hw = gt.receipt_width / 2.0, hh = gt.receipt_height / 2.0;
    const std::array<Point2d, 4> local = {{{-hw, -hh}, {hw, -hh}, {hw, hh}, {-hw, hh}}};
    for (std::size_t k = 0; k < 4; ++k) {
        gt.quad.corners[k] = {c * local[k].x - s * local[k].y + cx, s * local[k].x + c * local[k].y + cy};
    }

    if (spec.degradation != Degradation::OcrMiss) {
        out.ocr_text = noisy_page(gt.lines, spec.ocr_noise, mix_seed(spec.seed, 0x0C7ull));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Corpus

std::vector<SyntheticSpec> corpus_specs(const CorpusConfig& cfg, const SynthAssets& assets) {
    if (cfg.receipts < 0 || cfg.non_receipts < 0 || cfg.receipts + cfg.non_receipts == 0) {
        throw Error(ErrorCode::ConfigError, "corpus must contain at least one sample");
    }
    const auto& stores = assets.stores.stores();
    std::vector<SyntheticSpec> specs;
    std::uint64_t state = mix_seed(cfg.seed, 0x5EEDull);
    const auto pick_background = [&] {
        const double u = unit_uniform(state);
        return u < 0.4 ? Background::Plain : u < 0.7 ? Background::Textured : Background::PhotoTile;
    };
    for (int i = 0; i < cfg.receipts; ++i) {
        SyntheticSpec s;
        char id[16];
        std::snprintf(id, sizeof(id), "r%04d", i);
        s.sample_id = id;
        s.receipt = true;
        s.store_id = stores[static_cast<std::size_t>(i) % stores.size()].store_id;
        s.product_count = 4 + std::min(6, static_cast<int>(unit_uniform(state) * 7));
        s.rotation_deg = -10.0 + 20.0 * unit_uniform(state);
        s.background = pick_background();
        s.noise_sigma = 2.0 + 4.0 * unit_uniform(state);
        const double u = unit_uniform(state);
        s.logo = u < 0.8 ? LogoPlacement::Top : u < 0.9 ? LogoPlacement::BottomInverted : LogoPlacement::None;
        s.ocr_noise = cfg.ocr_noise;
        // never both detection paths damaged on the same sample
        if (i % 20 == 7 && s.background != Background::PhotoTile) s.degradation = Degradation::OcrMiss;
        if (i % 20 == 13) s.degradation = Degradation::LowContrast;
        s.seed = mix_seed(cfg.seed, static_cast<std::uint64_t>(i) + 1);
        specs.push_back(std::move(s));
    }
    for (int i = 0; i < cfg.non_receipts; ++i) {
        SyntheticSpec s;
        char id[16];
        std::snprintf(id, sizeof(id), "n%04d", i);
        s.sample_id = id;
        s.receipt = false;
        s.rotation_deg = -10.0 + 20.0 * unit_uniform(state);
        s.background = pick_background();
        s.noise_sigma = 2.0 + 4.0 * unit_uniform(state);
        s.logo = LogoPlacement::None;
        s.flyer = unit_uniform(state) < 0.3;
        s.ocr_noise = cfg.ocr_noise;
        s.seed = mix_seed(cfg.seed, 0x100000ull + static_cast<std::uint64_t>(i));
        specs.push_back(std::move(s));
    }
    return specs;
}

void write_corpus(const std::string& dir, const CorpusConfig& cfg) {
    const SynthAssets assets = default_assets(cfg.seed, cfg.stores);
    const auto specs = corpus_specs(cfg, assets);
    const fs::path root(dir);
    std::error_code ec;
    fs::create_directories(root / "logos", ec);
    if (ec) throw Error(ErrorCode::IoError, "cannot create " + (root / "logos").string());

    write_text(root / "stores.json", store_db_to_json(assets.stores));
    write_text(root / "ontology.json", ontology_to_json(assets.ontology));
    write_text(root / "abbreviations.tsv", std::string(default_abbreviations_tsv()));
    for (const auto& t : assets.logos) write_pgm(t.images.front(), (root / "logos" / (t.label + "_0.pgm")).string());

    std::atomic<std::size_t> next{0};
    std::vector<std::string> errors(specs.size());
    const auto worker = [&] {
        for (std::size_t i = next++; i < specs.size(); i = next++) {
            try {
                const auto sample = generate(specs[i], assets);
                const fs::path base = root / specs[i].sample_id;
                write_pgm(sample.image, base.string() + ".pgm");
                write_text(base.string() + ".gt.json", ground_truth_to_json(sample.truth));
                write_text(base.string() + ".ocr.txt", sample.ocr_text);
                if (cfg.oracle_heatmaps) {
                    write_text(base.string() + ".heatmap", format_heatmap(oracle_heatmap(sample.truth, 227, 57)));
                }
            } catch (const std::exception& e) {
                errors[i] = e.what();
            }
        }
    };
    const int jobs = std::max(1, cfg.jobs);
    std::vector<std::thread> pool;
    for (int j = 1; j < jobs; ++j) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    for (const auto& e : errors) {
        if (!e.empty()) throw Error(ErrorCode::IoError, "corpus generation failed: " + e);
    }

    json samples = json::array();
    for (const auto& s : specs) {
        samples.push_back({{"id", s.sample_id},
                           {"receipt", s.receipt},
                           {"store_id", s.store_id},
                           {"background", to_string(s.background)},
                           {"rotation_deg", s.rotation_deg},
                           {"logo", to_string(s.logo)},
                           {"degradation", to_string(s.degradation)},
                           {"flyer", s.flyer}});
    }
    json manifest{{"schema", "corpus-v1"},
                  {"seed", cfg.seed},
                  {"receipts", cfg.receipts},
                  {"non_receipts", cfg.non_receipts},
                  {"stores", cfg.stores},
                  {"ocr_noise", cfg.ocr_noise},
                  {"oracle_heatmaps", cfg.oracle_heatmaps},
                  {"samples", samples}};
    write_text(root / "corpus.json", manifest.dump(1));
}

}  // namespace receiptforge
