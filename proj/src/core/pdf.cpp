#include "pearl/core/pdf.hpp"

#include <zlib.h>

#include <opencv2/core.hpp>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iterator>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <variant>

namespace pearl {
namespace {

struct Object;
using Array = std::vector<Object>;
using Dict = std::map<std::string, Object, std::less<>>;

struct Name {
    std::string value;
};
struct Ref {
    int num = 0;
    int gen = 0;
};
struct Stream {
    Dict dict;
    std::vector<std::uint8_t> data;  // still encoded
};

struct Object {
    std::variant<std::monostate, bool, double, std::string, Name, std::shared_ptr<Array>, std::shared_ptr<Dict>, Ref,
                 std::shared_ptr<Stream>>
        v;

    bool is_null() const { return std::holds_alternative<std::monostate>(v); }
    const double* number() const { return std::get_if<double>(&v); }
    const Name* name() const { return std::get_if<Name>(&v); }
    const Ref* ref() const { return std::get_if<Ref>(&v); }
    const Array* array() const {
        auto p = std::get_if<std::shared_ptr<Array>>(&v);
        return p ? p->get() : nullptr;
    }
    const Dict* dict() const {
        if (auto p = std::get_if<std::shared_ptr<Dict>>(&v)) return p->get();
        if (auto s = std::get_if<std::shared_ptr<Stream>>(&v)) return &(*s)->dict;
        return nullptr;
    }
    const Stream* stream() const {
        auto p = std::get_if<std::shared_ptr<Stream>>(&v);
        return p ? p->get() : nullptr;
    }
};

bool is_white(std::uint8_t c) { return c == 0 || c == '\t' || c == '\n' || c == '\f' || c == '\r' || c == ' '; }
bool is_delim(std::uint8_t c) {
    return c == '(' || c == ')' || c == '<' || c == '>' || c == '[' || c == ']' || c == '{' || c == '}' ||
           c == '/' || c == '%';
}
bool is_regular(std::uint8_t c) { return !is_white(c) && !is_delim(c); }

int hex_value(std::uint8_t c) {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
}

std::vector<std::uint8_t> inflate_bytes(std::span<const std::uint8_t> in) {
    z_stream zs{};
    if (inflateInit(&zs) != Z_OK) throw PdfError("zlib init failed");
    std::vector<std::uint8_t> out;
    std::uint8_t buf[65536];
    zs.next_in = const_cast<Bytef*>(in.data());
    zs.avail_in = static_cast<uInt>(in.size());
    int rc = Z_OK;
    while (rc != Z_STREAM_END) {
        zs.next_out = buf;
        zs.avail_out = sizeof(buf);
        rc = inflate(&zs, Z_NO_FLUSH);
        if (rc != Z_OK && rc != Z_STREAM_END) {
            // Trailing garbage after a complete deflate stream is common; keep what we have.
            if (rc == Z_BUF_ERROR && zs.avail_in == 0) break;
            inflateEnd(&zs);
            throw PdfError("corrupt FlateDecode stream");
        }
        out.insert(out.end(), buf, buf + (sizeof(buf) - zs.avail_out));
        if (rc == Z_OK && zs.avail_in == 0 && zs.avail_out != 0) break;
    }
    inflateEnd(&zs);
    return out;
}

// PNG row predictors (Predictor >= 10) as used by xref streams and Flate images.
std::vector<std::uint8_t> undo_png_predictor(const std::vector<std::uint8_t>& in, int colors, int bpc, int columns) {
    const int bpp = std::max(1, colors * bpc / 8);
    const std::size_t row_len = static_cast<std::size_t>((columns * colors * bpc + 7) / 8);
    std::vector<std::uint8_t> out;
    std::vector<std::uint8_t> prev(row_len, 0);
    std::size_t pos = 0;
    while (pos + 1 + row_len <= in.size()) {
        const std::uint8_t type = in[pos++];
        std::vector<std::uint8_t> row(in.begin() + static_cast<std::ptrdiff_t>(pos),
                                      in.begin() + static_cast<std::ptrdiff_t>(pos + row_len));
        pos += row_len;
        for (std::size_t i = 0; i < row_len; ++i) {
            const int left = i >= static_cast<std::size_t>(bpp) ? row[i - bpp] : 0;
            const int up = prev[i];
            const int up_left = i >= static_cast<std::size_t>(bpp) ? prev[i - bpp] : 0;
            int add = 0;
            switch (type) {
                case 0: add = 0; break;
                case 1: add = left; break;
                case 2: add = up; break;
                case 3: add = (left + up) / 2; break;
                case 4: {
                    const int p = left + up - up_left;
                    const int pa = std::abs(p - left), pb = std::abs(p - up), pc = std::abs(p - up_left);
                    add = (pa <= pb && pa <= pc) ? left : (pb <= pc ? up : up_left);
                    break;
                }
                default: throw PdfError("unknown PNG predictor");
            }
            row[i] = static_cast<std::uint8_t>(row[i] + add);
        }
        out.insert(out.end(), row.begin(), row.end());
        prev = std::move(row);
    }
    return out;
}

class Parser {
public:
    Parser(std::span<const std::uint8_t> data, std::size_t pos) : data_(data), pos_(pos) {}

    std::size_t pos() const { return pos_; }
    void seek(std::size_t p) { pos_ = p; }
    bool at_end() {
        skip_space();
        return pos_ >= data_.size();
    }

    void skip_space() {
        while (pos_ < data_.size()) {
            if (is_white(data_[pos_])) {
                ++pos_;
            } else if (data_[pos_] == '%') {
                while (pos_ < data_.size() && data_[pos_] != '\n' && data_[pos_] != '\r') ++pos_;
            } else {
                break;
            }
        }
    }

    bool peek_keyword(std::string_view kw) {
        skip_space();
        if (pos_ + kw.size() > data_.size()) return false;
        if (!std::equal(kw.begin(), kw.end(), data_.begin() + static_cast<std::ptrdiff_t>(pos_))) return false;
        const std::size_t after = pos_ + kw.size();
        return after >= data_.size() || !is_regular(data_[after]);
    }

    bool take_keyword(std::string_view kw) {
        if (!peek_keyword(kw)) return false;
        pos_ += kw.size();
        return true;
    }

    std::optional<long long> try_integer() {
        skip_space();
        std::size_t p = pos_;
        if (p < data_.size() && (data_[p] == '+' || data_[p] == '-')) ++p;
        const std::size_t digits = p;
        while (p < data_.size() && std::isdigit(data_[p])) ++p;
        if (p == digits || (p < data_.size() && (data_[p] == '.' || is_regular(data_[p])))) return std::nullopt;
        long long v = 0;
        std::from_chars(reinterpret_cast<const char*>(data_.data() + pos_),
                        reinterpret_cast<const char*>(data_.data() + p), v);
        if (data_[pos_] == '+') {
            std::from_chars(reinterpret_cast<const char*>(data_.data() + pos_ + 1),
                            reinterpret_cast<const char*>(data_.data() + p), v);
        }
        pos_ = p;
        return v;
    }

    // `resolve_length` resolves an indirect /Length; it may fail (returns nullopt).
    template <typename LengthResolver>
    Object parse(LengthResolver&& resolve_length, int depth = 0) {
        if (depth > 64) throw PdfError("object nesting too deep");
        skip_space();
        if (pos_ >= data_.size()) throw PdfError("unexpected end of file");
        const std::uint8_t c = data_[pos_];
        if (c == '<' && pos_ + 1 < data_.size() && data_[pos_ + 1] == '<') {
            pos_ += 2;
            auto dict = std::make_shared<Dict>();
            while (true) {
                skip_space();
                if (pos_ + 1 < data_.size() && data_[pos_] == '>' && data_[pos_ + 1] == '>') {
                    pos_ += 2;
                    break;
                }
                Object key = parse(resolve_length, depth + 1);
                if (!key.name()) throw PdfError("dictionary key is not a name");
                (*dict)[key.name()->value] = parse(resolve_length, depth + 1);
            }
            if (take_keyword("stream")) return read_stream(std::move(*dict), resolve_length);
            return Object{dict};
        }
        if (c == '<') return Object{read_hex_string()};
        if (c == '(') return Object{read_literal_string()};
        if (c == '/') return Object{read_name()};
        if (c == '[') {
            ++pos_;
            auto arr = std::make_shared<Array>();
            while (true) {
                skip_space();
                if (pos_ < data_.size() && data_[pos_] == ']') {
                    ++pos_;
                    break;
                }
                arr->push_back(parse(resolve_length, depth + 1));
            }
            return Object{arr};
        }
        if (take_keyword("true")) return Object{true};
        if (take_keyword("false")) return Object{false};
        if (take_keyword("null")) return Object{};
        const std::size_t start = pos_;
        if (auto first = try_integer()) {
            const std::size_t after_first = pos_;
            if (auto second = try_integer(); second && take_keyword("R")) {
                return Object{Ref{static_cast<int>(*first), static_cast<int>(*second)}};
            }
            pos_ = after_first;
            return Object{static_cast<double>(*first)};
        }
        pos_ = start;
        return Object{read_real()};
    }

private:
    template <typename LengthResolver>
    Object read_stream(Dict dict, LengthResolver&& resolve_length) {
        if (pos_ < data_.size() && data_[pos_] == '\r') ++pos_;
        if (pos_ < data_.size() && data_[pos_] == '\n') ++pos_;
        const std::size_t begin = pos_;
        std::optional<std::size_t> length;
        if (auto it = dict.find("Length"); it != dict.end()) {
            if (auto n = it->second.number()) length = static_cast<std::size_t>(*n);
            else if (auto r = it->second.ref()) length = resolve_length(*r);
        }
        std::size_t end = 0;
        if (length && begin + *length <= data_.size() && ends_with_endstream(begin + *length)) {
            end = begin + *length;
        } else {
            static constexpr std::string_view kEnd = "endstream";
            auto it = std::search(data_.begin() + static_cast<std::ptrdiff_t>(begin), data_.end(), kEnd.begin(),
                                  kEnd.end());
            if (it == data_.end()) throw PdfError("unterminated stream");
            end = static_cast<std::size_t>(it - data_.begin());
            while (end > begin && (data_[end - 1] == '\n' || data_[end - 1] == '\r')) --end;
        }
        auto stream = std::make_shared<Stream>();
        stream->dict = std::move(dict);
        stream->data.assign(data_.begin() + static_cast<std::ptrdiff_t>(begin),
                            data_.begin() + static_cast<std::ptrdiff_t>(end));
        pos_ = end;
        take_keyword("endstream");
        return Object{stream};
    }

    bool ends_with_endstream(std::size_t p) {
        const std::size_t saved = pos_;
        pos_ = p;
        const bool ok = peek_keyword("endstream");
        pos_ = saved;
        return ok;
    }

    std::string read_hex_string() {
        ++pos_;
        std::string out;
        int hi = -1;
        while (pos_ < data_.size() && data_[pos_] != '>') {
            const int v = hex_value(data_[pos_++]);
            if (v < 0) continue;
            if (hi < 0) {
                hi = v;
            } else {
                out.push_back(static_cast<char>(hi * 16 + v));
                hi = -1;
            }
        }
        if (hi >= 0) out.push_back(static_cast<char>(hi * 16));
        ++pos_;
        return out;
    }

    std::string read_literal_string() {
        ++pos_;
        std::string out;
        int nesting = 1;
        while (pos_ < data_.size()) {
            const char c = static_cast<char>(data_[pos_++]);
            if (c == '\\' && pos_ < data_.size()) {
                const char e = static_cast<char>(data_[pos_++]);
                switch (e) {
                    case 'n': out.push_back('\n'); break;
                    case 'r': out.push_back('\r'); break;
                    case 't': out.push_back('\t'); break;
                    case 'b': out.push_back('\b'); break;
                    case 'f': out.push_back('\f'); break;
                    case '\r':
                        if (pos_ < data_.size() && data_[pos_] == '\n') ++pos_;
                        break;
                    case '\n': break;
                    default:
                        if (e >= '0' && e <= '7') {
                            int v = e - '0';
                            for (int k = 0; k < 2 && pos_ < data_.size() && data_[pos_] >= '0' && data_[pos_] <= '7'; ++k) {
                                v = v * 8 + (data_[pos_++] - '0');
                            }
                            out.push_back(static_cast<char>(v));
                        } else {
                            out.push_back(e);
                        }
                }
                continue;
            }
            if (c == '(') ++nesting;
            if (c == ')' && --nesting == 0) break;
            out.push_back(c);
        }
        return out;
    }

    Name read_name() {
        ++pos_;
        std::string out;
        while (pos_ < data_.size() && is_regular(data_[pos_])) {
            if (data_[pos_] == '#' && pos_ + 2 < data_.size() && hex_value(data_[pos_ + 1]) >= 0 &&
                hex_value(data_[pos_ + 2]) >= 0) {
                out.push_back(static_cast<char>(hex_value(data_[pos_ + 1]) * 16 + hex_value(data_[pos_ + 2])));
                pos_ += 3;
            } else {
                out.push_back(static_cast<char>(data_[pos_++]));
            }
        }
        return Name{out};
    }

    double read_real() {
        const std::size_t start = pos_;
        while (pos_ < data_.size() && is_regular(data_[pos_])) ++pos_;
        const std::string token(data_.begin() + static_cast<std::ptrdiff_t>(start),
                                data_.begin() + static_cast<std::ptrdiff_t>(pos_));
        if (token.empty()) throw PdfError("unexpected delimiter in PDF object");
        try {
            std::size_t used = 0;
            const double v = std::stod(token, &used);
            if (used != token.size()) throw PdfError("bad token '" + token + "'");
            return v;
        } catch (const std::logic_error&) {
            throw PdfError("bad token '" + token + "'");
        }
    }

    std::span<const std::uint8_t> data_;
    std::size_t pos_;
};

}  // namespace

struct PdfDocument::Impl {
    std::vector<std::uint8_t> bytes;
    std::map<int, std::size_t> offsets;  // object number -> byte offset of "N G obj"
    std::map<int, Object> cache;
    std::set<int> resolving;
    Dict trailer;

    struct PageInfo {
        Dict dict;
        double width_pt = 612;
        double height_pt = 792;
        int rotate = 0;
        Dict resources;
    };
    std::vector<PageInfo> pages;

    std::optional<std::size_t> resolve_length(Ref r) {
        const Object o = resolve(Object{r});
        if (auto n = o.number()) return static_cast<std::size_t>(*n);
        return std::nullopt;
    }

    Object parse_at(std::size_t offset) {
        Parser p(bytes, offset);
        p.try_integer();
        p.try_integer();
        if (!p.take_keyword("obj")) throw PdfError("object header expected");
        return p.parse([this](Ref r) { return resolve_length(r); });
    }

    Object resolve(const Object& o) {
        const Ref* r = o.ref();
        if (!r) return o;
        if (auto it = cache.find(r->num); it != cache.end()) return it->second;
        auto off = offsets.find(r->num);
        if (off == offsets.end() || resolving.count(r->num)) return Object{};
        resolving.insert(r->num);
        Object result;
        try {
            result = parse_at(off->second);
        } catch (...) {
            resolving.erase(r->num);
            throw;
        }
        resolving.erase(r->num);
        cache[r->num] = result;
        return result;
    }

    Object get(const Dict& d, std::string_view key) {
        auto it = d.find(key);
        return it == d.end() ? Object{} : resolve(it->second);
    }

    std::vector<std::uint8_t> decode_stream(const Stream& s, bool allow_dct_passthrough) {
        Object filter = get(s.dict, "Filter");
        std::vector<std::string> filters;
        if (auto n = filter.name()) filters.push_back(n->value);
        if (auto a = filter.array()) {
            for (const auto& f : *a) {
                if (auto n = resolve(f).name()) filters.push_back(n->value);
            }
        }
        std::vector<std::uint8_t> data = s.data;
        for (std::size_t i = 0; i < filters.size(); ++i) {
            const auto& f = filters[i];
            if (f == "FlateDecode" || f == "Fl") {
                data = inflate_bytes(data);
                Object parms = get(s.dict, "DecodeParms");
                if (auto pa = parms.array(); pa && i < pa->size()) parms = resolve((*pa)[i]);
                if (auto pd = parms.dict()) {
                    const double predictor = get(*pd, "Predictor").number() ? *get(*pd, "Predictor").number() : 1;
                    if (predictor >= 10) {
                        auto num = [&](std::string_view k, double def) {
                            auto v = get(*pd, k);
                            return static_cast<int>(v.number() ? *v.number() : def);
                        };
                        data = undo_png_predictor(data, num("Colors", 1), num("BitsPerComponent", 8), num("Columns", 1));
                    } else if (predictor != 1) {
                        throw PdfError("unsupported TIFF predictor");
                    }
                }
            } else if ((f == "DCTDecode" || f == "DCT") && allow_dct_passthrough && i + 1 == filters.size()) {
                break;
            } else {
                throw PdfError("unsupported stream filter " + f);
            }
        }
        return data;
    }

    void index_objects() {
        static constexpr std::string_view kObj = "obj";
        const auto& b = bytes;
        for (auto it = std::search(b.begin(), b.end(), kObj.begin(), kObj.end()); it != b.end();
             it = std::search(it + 1, b.end(), kObj.begin(), kObj.end())) {
            const std::size_t at = static_cast<std::size_t>(it - b.begin());
            if (at + 3 < b.size() && is_regular(b[at + 3])) continue;
            // Walk back over "<num> <gen> " to find the header start.
            std::size_t p = at;
            auto skip_back_white = [&] {
                while (p > 0 && is_white(b[p - 1])) --p;
            };
            auto skip_back_digits = [&] {
                const std::size_t end = p;
                while (p > 0 && std::isdigit(b[p - 1])) --p;
                return p != end;
            };
            skip_back_white();
            if (!skip_back_digits()) continue;
            skip_back_white();
            if (!skip_back_digits()) continue;
            if (p > 0 && is_regular(b[p - 1])) continue;
            Parser header(b, p);
            const auto num = header.try_integer();
            if (!num) continue;
            // Later definitions win (incremental updates append newer objects).
            offsets[static_cast<int>(*num)] = p;
        }
    }

    void expand_object_streams() {
        std::vector<std::pair<int, std::size_t>> snapshot(offsets.begin(), offsets.end());
        for (const auto& [num, off] : snapshot) {
            Object o;
            try {
                o = parse_at(off);
            } catch (const PdfError&) {
                continue;
            }
            const Stream* s = o.stream();
            if (!s) continue;
            Object type = get(s->dict, "Type");
            if (type.name() && type.name()->value == "XRef" && trailer.empty()) trailer = s->dict;
            if (!type.name() || type.name()->value != "ObjStm") continue;
            const auto data = decode_stream(*s, false);
            const int n = static_cast<int>(get(s->dict, "N").number() ? *get(s->dict, "N").number() : 0);
            const std::size_t first =
                static_cast<std::size_t>(get(s->dict, "First").number() ? *get(s->dict, "First").number() : 0);
            Parser header(data, 0);
            for (int k = 0; k < n; ++k) {
                const auto obj_num = header.try_integer();
                const auto obj_off = header.try_integer();
                if (!obj_num || !obj_off) throw PdfError("corrupt object stream header");
                if (offsets.count(static_cast<int>(*obj_num)) || cache.count(static_cast<int>(*obj_num))) continue;
                Parser body(data, first + static_cast<std::size_t>(*obj_off));
                cache[static_cast<int>(*obj_num)] = body.parse([this](Ref r) { return resolve_length(r); });
            }
        }
    }

    void find_trailer() {
        static constexpr std::string_view kTrailer = "trailer";
        auto it = std::find_end(bytes.begin(), bytes.end(), kTrailer.begin(), kTrailer.end());
        if (it == bytes.end()) return;
        Parser p(bytes, static_cast<std::size_t>(it - bytes.begin()) + kTrailer.size());
        Object t = p.parse([this](Ref r) { return resolve_length(r); });
        if (auto d = t.dict()) trailer = *d;
    }

    Object find_catalog() {
        if (auto it = trailer.find("Root"); it != trailer.end()) {
            Object root = resolve(it->second);
            if (root.dict()) return root;
        }
        for (const auto& [num, off] : offsets) {
            Object o = resolve(Object{Ref{num, 0}});
            if (auto d = o.dict()) {
                auto type = get(*d, "Type");
                if (type.name() && type.name()->value == "Catalog") return o;
            }
        }
        for (const auto& [num, o] : cache) {
            if (auto d = o.dict()) {
                auto type = get(*d, "Type");
                if (type.name() && type.name()->value == "Catalog") return o;
            }
        }
        throw PdfError("PDF has no document catalog");
    }

    void collect_pages(const Object& node_obj, PageInfo inherited, std::set<const Dict*>& seen, int depth) {
        const Dict* node = node_obj.dict();
        if (!node || depth > 64 || !seen.insert(node).second) throw PdfError("corrupt page tree");
        if (auto box = get(*node, "MediaBox").array(); box && box->size() == 4) {
            double v[4];
            for (int i = 0; i < 4; ++i) {
                auto n = resolve((*box)[i]).number();
                if (!n) throw PdfError("non-numeric MediaBox");
                v[i] = *n;
            }
            inherited.width_pt = std::abs(v[2] - v[0]);
            inherited.height_pt = std::abs(v[3] - v[1]);
        }
        if (auto rot = get(*node, "Rotate").number()) inherited.rotate = ((static_cast<int>(*rot) % 360) + 360) % 360;
        if (auto res = get(*node, "Resources").dict()) inherited.resources = *res;

        auto type = get(*node, "Type");
        auto kids = get(*node, "Kids");
        const bool is_tree = (type.name() && type.name()->value == "Pages") || (!type.name() && kids.array());
        if (!is_tree) {
            inherited.dict = *node;
            pages.push_back(std::move(inherited));
            return;
        }
        if (auto arr = kids.array()) {
            for (const auto& kid : *arr) collect_pages(resolve(kid), inherited, seen, depth + 1);
        }
    }

    void load() {
        static constexpr std::string_view kMagic = "%PDF-";
        const std::size_t scan = std::min<std::size_t>(bytes.size(), 1024);
        if (std::search(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(scan), kMagic.begin(),
                        kMagic.end()) == bytes.begin() + static_cast<std::ptrdiff_t>(scan)) {
            throw PdfError("not a PDF file (missing %PDF- header)");
        }
        index_objects();
        find_trailer();
        expand_object_streams();
        Object catalog = find_catalog();
        Object root_pages = get(*catalog.dict(), "Pages");
        if (!root_pages.dict()) throw PdfError("PDF catalog has no page tree");
        std::set<const Dict*> seen;
        collect_pages(root_pages, PageInfo{}, seen, 0);
    }

    std::optional<RasterImage> decode_image(const Stream& s) {
        Object filter = get(s.dict, "Filter");
        bool dct = false;
        if (auto n = filter.name()) dct = n->value == "DCTDecode" || n->value == "DCT";
        if (auto a = filter.array(); a && !a->empty()) {
            auto last = resolve(a->back()).name();
            dct = last && (last->value == "DCTDecode" || last->value == "DCT");
        }
        const auto data = decode_stream(s, true);
        if (dct) return decode_jpeg(data);

        auto num = [&](std::string_view k) {
            auto v = get(s.dict, k);
            return v.number() ? static_cast<int>(*v.number()) : 0;
        };
        const int w = num("Width");
        const int h = num("Height");
        const int bpc = num("BitsPerComponent");
        int channels = 0;
        Object cs = get(s.dict, "ColorSpace");
        if (auto n = cs.name()) {
            if (n->value == "DeviceGray" || n->value == "G") channels = 1;
            if (n->value == "DeviceRGB" || n->value == "RGB") channels = 3;
        } else if (auto a = cs.array(); a && a->size() == 2) {
            auto family = resolve((*a)[0]).name();
            if (family && family->value == "ICCBased") {
                if (auto icc = resolve((*a)[1]).dict()) {
                    auto comps = get(*icc, "N").number();
                    if (comps && (*comps == 1 || *comps == 3)) channels = static_cast<int>(*comps);
                }
            }
        }
        if (w <= 0 || h <= 0 || bpc != 8 || channels == 0) return std::nullopt;
        const std::size_t need = static_cast<std::size_t>(w) * h * channels;
        if (data.size() < need) throw PdfError("image stream shorter than its declared size");
        RasterImage img;
        img.width = w;
        img.height = h;
        img.channels = channels;
        img.pixels.assign(data.begin(), data.begin() + static_cast<std::ptrdiff_t>(need));
        return img;
    }

    std::optional<RasterImage> largest_image(const PageInfo& page) {
        auto xobjects = get(page.resources, "XObject").dict();
        if (!xobjects) return std::nullopt;
        Object best;
        long long best_area = 0;
        for (const auto& [key, value] : *xobjects) {
            Object o = resolve(value);
            const Stream* s = o.stream();
            if (!s) continue;
            auto subtype = get(s->dict, "Subtype").name();
            if (!subtype || subtype->value != "Image") continue;
            auto w = get(s->dict, "Width").number();
            auto h = get(s->dict, "Height").number();
            const long long area = (w && h) ? static_cast<long long>(*w) * static_cast<long long>(*h) : 0;
            if (area > best_area) {
                best_area = area;
                best = o;
            }
        }
        if (!best.stream()) return std::nullopt;
        return decode_image(*best.stream());
    }
};

PdfDocument::PdfDocument(std::unique_ptr<Impl> impl) : impl_(std::move(impl)) {}
PdfDocument::PdfDocument(PdfDocument&&) noexcept = default;
PdfDocument& PdfDocument::operator=(PdfDocument&&) noexcept = default;
PdfDocument::~PdfDocument() = default;

PdfDocument PdfDocument::parse(std::vector<std::uint8_t> bytes) {
    auto impl = std::make_unique<Impl>();
    impl->bytes = std::move(bytes);
    impl->load();
    return PdfDocument(std::move(impl));
}

PdfDocument PdfDocument::open(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw PdfError("cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse(std::move(bytes));
}

std::size_t PdfDocument::page_count() const { return impl_->pages.size(); }

std::pair<double, double> PdfDocument::page_size(std::size_t page) const {
    const auto& p = impl_->pages.at(page);
    if (p.rotate == 90 || p.rotate == 270) return {p.height_pt, p.width_pt};
    return {p.width_pt, p.height_pt};
}

RasterImage PdfDocument::render_page(std::size_t page, int dpi) const {
    const auto& info = impl_->pages.at(page);
    const int width = std::max(1, static_cast<int>(std::lround(info.width_pt * dpi / 72.0)));
    const int height = std::max(1, static_cast<int>(std::lround(info.height_pt * dpi / 72.0)));

    RasterImage canvas;
    if (auto img = impl_->largest_image(info)) {
        canvas = resize_area(*img, {width, height});
    } else {
        canvas.width = width;
        canvas.height = height;
        canvas.channels = 1;
        canvas.pixels.assign(static_cast<std::size_t>(width) * height, 255);
    }
    if (info.rotate == 0) return canvas;

    const int type = canvas.channels == 1 ? CV_8UC1 : CV_8UC3;
    cv::Mat src(canvas.height, canvas.width, type, canvas.pixels.data());
    cv::Mat dst;
    const int code = info.rotate == 90 ? cv::ROTATE_90_CLOCKWISE
                     : info.rotate == 180 ? cv::ROTATE_180
                                          : cv::ROTATE_90_COUNTERCLOCKWISE;
    cv::rotate(src, dst, code);
    RasterImage out;
    out.width = dst.cols;
    out.height = dst.rows;
    out.channels = canvas.channels;
    out.pixels.assign(dst.datastart, dst.dataend);
    return out;
}

}  // namespace pearl
