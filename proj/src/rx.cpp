// SPDX-License-Identifier: Apache-2.0
#include "lexeval/rx.hpp"

#include <cctype>
#include <sstream>

#include "lexeval/errors.hpp"

namespace lexeval::rx {

namespace {

constexpr std::size_t kMaxProgram = 100000;
constexpr std::size_t kMaxCount = 1000;

bool is_word_byte(unsigned char c) {
    return std::isalnum(c) || c == '_';
}

bool is_space_byte(unsigned char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

} // namespace

// Pattern -> AST -> instructions. Code is generated backwards with an
// explicit continuation pc, so no jump patching is needed; counted repeats
// are expanded at the AST level by copying subtrees.
struct Compiler {
    struct Node {
        enum class Kind { Empty, Class, BeginLine, EndLine, Concat, Alt, Star, Plus, Opt };
        Kind kind = Kind::Empty;
        Regex::ByteSet cls;
        std::vector<Node> children;
    };

    std::string_view pat;
    std::size_t pos = 0;
    std::vector<Regex::Inst>& prog;
    std::size_t entry = 0;

    [[noreturn]] void fail(const std::string& what) const {
        std::ostringstream os;
        os << "regex error at offset " << pos << ": " << what;
        throw ParseError(os.str());
    }

    bool eof() const { return pos >= pat.size(); }
    char peek() const { return pat[pos]; }

    static Node class_node(const Regex::ByteSet& cls) {
        Node n;
        n.kind = Node::Kind::Class;
        n.cls = cls;
        return n;
    }

    Regex::ByteSet named_class(char c, bool& recognized) const {
        Regex::ByteSet set;
        recognized = true;
        auto fill = [&set](bool (*pred)(unsigned char)) {
            for (int b = 0; b < 256; ++b)
                if (pred(static_cast<unsigned char>(b)))
                    set.add(static_cast<unsigned char>(b));
        };
        switch (c) {
            case 'd': case 'D':
                for (unsigned char b = '0'; b <= '9'; ++b) set.add(b);
                if (c == 'D') set.invert();
                break;
            case 'w': case 'W':
                fill(&is_word_byte);
                if (c == 'W') set.invert();
                break;
            case 's': case 'S':
                fill(&is_space_byte);
                if (c == 'S') set.invert();
                break;
            default:
                recognized = false;
                break;
        }
        return set;
    }

    Regex::ByteSet parse_escape() {
        ++pos; // consume '\'
        if (eof()) fail("dangling backslash");
        char c = pat[pos++];
        bool recognized = false;
        auto cls = named_class(c, recognized);
        if (recognized) return cls;
        Regex::ByteSet set;
        switch (c) {
            case 'n': set.add('\n'); return set;
            case 't': set.add('\t'); return set;
            case 'r': set.add('\r'); return set;
            default: break;
        }
        if (std::ispunct(static_cast<unsigned char>(c)) || c == ' ') {
            set.add(static_cast<unsigned char>(c));
            return set;
        }
        --pos;
        fail(std::string("unknown escape '\\") + c + "'");
    }

    Regex::ByteSet parse_class() {
        ++pos; // consume '['
        Regex::ByteSet set;
        bool negate = false;
        if (!eof() && peek() == '^') {
            negate = true;
            ++pos;
        }
        bool first = true;
        while (true) {
            if (eof()) fail("unterminated character class");
            char c = peek();
            if (c == ']' && !first) {
                ++pos;
                break;
            }
            first = false;
            if (c == '\\') {
                auto sub = parse_escape();
                for (int b = 0; b < 256; ++b)
                    if (sub.test(static_cast<unsigned char>(b)))
                        set.add(static_cast<unsigned char>(b));
                continue;
            }
            ++pos;
            if (!eof() && peek() == '-' && pos + 1 < pat.size() && pat[pos + 1] != ']') {
                ++pos;
                char hi = pat[pos];
                if (hi == '\\') fail("escape not allowed as range upper bound");
                ++pos;
                if (static_cast<unsigned char>(c) > static_cast<unsigned char>(hi))
                    fail("class range lower bound exceeds upper bound");
                for (unsigned char b = static_cast<unsigned char>(c);; ++b) {
                    set.add(b);
                    if (b == static_cast<unsigned char>(hi)) break;
                }
            } else {
                set.add(static_cast<unsigned char>(c));
            }
        }
        if (negate) set.invert();
        return set;
    }

    Node parse_atom() {
        char c = peek();
        if (c == '(') {
            ++pos;
            auto inner = parse_alt();
            if (eof() || peek() != ')') fail("unclosed group");
            ++pos;
            return inner;
        }
        if (c == '[') return class_node(parse_class());
        if (c == '\\') return class_node(parse_escape());
        if (c == '.') {
            ++pos;
            Regex::ByteSet any;
            any.add('\n');
            any.invert();
            return class_node(any);
        }
        if (c == '^' || c == '$') {
            ++pos;
            Node n;
            n.kind = (c == '^') ? Node::Kind::BeginLine : Node::Kind::EndLine;
            return n;
        }
        if (c == '*' || c == '+' || c == '?') fail("quantifier has nothing to repeat");
        if (c == '{') fail("counted repeat has nothing to repeat");
        ++pos;
        Regex::ByteSet one;
        one.add(static_cast<unsigned char>(c));
        return class_node(one);
    }

    static Node wrap(Node::Kind kind, Node child) {
        Node n;
        n.kind = kind;
        n.children.push_back(std::move(child));
        return n;
    }

    // a{m,n} => m copies then nested optionals: a a (a (a)?)?
    static Node counted(const Node& atom, std::size_t lo, std::size_t hi, bool unbounded) {
        Node seq;
        seq.kind = Node::Kind::Concat;
        for (std::size_t i = 0; i < lo; ++i) seq.children.push_back(atom);
        if (unbounded) {
            if (lo == 0) return wrap(Node::Kind::Star, atom);
            seq.children.back() = wrap(Node::Kind::Plus, atom);
            return seq;
        }
        if (hi > lo) {
            Node tail = wrap(Node::Kind::Opt, atom);
            for (std::size_t i = lo + 1; i < hi; ++i) {
                Node pair;
                pair.kind = Node::Kind::Concat;
                pair.children.push_back(atom);
                pair.children.push_back(std::move(tail));
                tail = wrap(Node::Kind::Opt, std::move(pair));
            }
            seq.children.push_back(std::move(tail));
        }
        if (seq.children.empty()) return Node{}; // {0}
        return seq;
    }

    Node parse_quantified() {
        auto atom = parse_atom();
        while (!eof()) {
            char q = peek();
            if (q != '*' && q != '+' && q != '?' && q != '{') break;
            if (atom.kind == Node::Kind::BeginLine || atom.kind == Node::Kind::EndLine)
                fail("cannot repeat an anchor");
            if (q == '{') {
                std::size_t close = pat.find('}', pos + 1);
                if (close == std::string_view::npos) fail("unterminated counted repeat");
                std::string body(pat.substr(pos + 1, close - pos - 1));
                auto parse_num = [this](const std::string& s) -> std::size_t {
                    if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos)
                        fail("malformed counted repeat");
                    unsigned long v = std::stoul(s);
                    if (v > kMaxCount) fail("counted repeat bound above 1000");
                    return v;
                };
                std::size_t comma = body.find(',');
                std::size_t lo = 0, hi = 0;
                bool unbounded = false;
                if (comma == std::string::npos) {
                    lo = hi = parse_num(body);
                } else {
                    lo = parse_num(body.substr(0, comma));
                    std::string rest = body.substr(comma + 1);
                    if (rest.empty()) {
                        unbounded = true;
                    } else {
                        hi = parse_num(rest);
                        if (hi < lo) fail("counted repeat upper bound below lower bound");
                    }
                }
                pos = close + 1;
                atom = counted(atom, lo, hi, unbounded);
            } else {
                ++pos;
                auto kind = (q == '*')   ? Node::Kind::Star
                            : (q == '+') ? Node::Kind::Plus
                                         : Node::Kind::Opt;
                atom = wrap(kind, std::move(atom));
            }
        }
        return atom;
    }

    Node parse_concat() {
        Node seq;
        seq.kind = Node::Kind::Concat;
        while (!eof() && peek() != '|' && peek() != ')')
            seq.children.push_back(parse_quantified());
        if (seq.children.empty()) return Node{};
        if (seq.children.size() == 1) return std::move(seq.children.front());
        return seq;
    }

    Node parse_alt() {
        auto first = parse_concat();
        if (eof() || peek() != '|') return first;
        Node alt;
        alt.kind = Node::Kind::Alt;
        alt.children.push_back(std::move(first));
        while (!eof() && peek() == '|') {
            ++pos;
            alt.children.push_back(parse_concat());
        }
        return alt;
    }

    std::size_t emit(Regex::Inst inst) {
        if (prog.size() >= kMaxProgram) fail("pattern expands past the size limit");
        prog.push_back(inst);
        return prog.size() - 1;
    }

    // Emits code for `node` whose success continuation is `next`; returns the
    // entry pc.
    std::size_t gen(const Node& node, std::size_t next) {
        switch (node.kind) {
            case Node::Kind::Empty:
                return next;
            case Node::Kind::Class: {
                Regex::Inst inst;
                inst.op = Regex::Op::Class;
                inst.cls = node.cls;
                inst.x = next;
                return emit(inst);
            }
            case Node::Kind::BeginLine:
            case Node::Kind::EndLine: {
                Regex::Inst inst;
                inst.op = node.kind == Node::Kind::BeginLine ? Regex::Op::BeginLine
                                                             : Regex::Op::EndLine;
                inst.x = next;
                return emit(inst);
            }
            case Node::Kind::Concat: {
                std::size_t cont = next;
                for (auto it = node.children.rbegin(); it != node.children.rend(); ++it)
                    cont = gen(*it, cont);
                return cont;
            }
            case Node::Kind::Alt: {
                std::vector<std::size_t> entries;
                entries.reserve(node.children.size());
                for (const auto& child : node.children)
                    entries.push_back(gen(child, next));
                std::size_t chain = entries.back();
                for (std::size_t i = entries.size() - 1; i-- > 0;) {
                    Regex::Inst split;
                    split.op = Regex::Op::Split;
                    split.x = entries[i];
                    split.y = chain;
                    chain = emit(split);
                }
                return chain;
            }
            case Node::Kind::Star: {
                Regex::Inst split;
                split.op = Regex::Op::Split;
                auto s = emit(split);
                auto body = gen(node.children.front(), s);
                prog[s].x = body;
                prog[s].y = next;
                return s;
            }
            case Node::Kind::Plus: {
                Regex::Inst split;
                split.op = Regex::Op::Split;
                auto s = emit(split);
                auto body = gen(node.children.front(), s);
                prog[s].x = body;
                prog[s].y = next;
                return body;
            }
            case Node::Kind::Opt: {
                auto body = gen(node.children.front(), next);
                Regex::Inst split;
                split.op = Regex::Op::Split;
                split.x = body;
                split.y = next;
                return emit(split);
            }
        }
        fail("internal: unhandled node kind");
    }

    void compile() {
        auto root = parse_alt();
        if (!eof()) fail(peek() == ')' ? "unmatched ')'" : "trailing pattern syntax");
        Regex::Inst match;
        match.op = Regex::Op::Match;
        auto m = emit(match);
        entry = gen(root, m);
    }
};

struct Vm {
    const std::vector<Regex::Inst>& prog;
    std::string_view text;

    struct Thread {
        std::size_t pc;
        std::size_t start;
    };

    std::vector<std::size_t> mark; // per-pc generation stamp for dedup
    std::size_t gen = 0;

    Vm(const std::vector<Regex::Inst>& p, std::string_view t)
        : prog(p), text(t), mark(p.size(), 0) {}

    bool at_line_begin(std::size_t i) const { return i == 0 || text[i - 1] == '\n'; }
    bool at_line_end(std::size_t i) const { return i == text.size() || text[i] == '\n'; }

    // Expands epsilon transitions from pc at position i. Class instructions
    // land in `list`; reaching Match updates `best` under leftmost-longest.
    void add_thread(std::vector<Thread>& list, std::size_t pc, std::size_t start,
                    std::size_t i, std::optional<Match>& best) {
        if (mark[pc] == gen) return;
        mark[pc] = gen;
        const auto& inst = prog[pc];
        switch (inst.op) {
            case Regex::Op::Split:
                add_thread(list, inst.x, start, i, best);
                add_thread(list, inst.y, start, i, best);
                return;
            case Regex::Op::BeginLine:
                if (at_line_begin(i)) add_thread(list, inst.x, start, i, best);
                return;
            case Regex::Op::EndLine:
                if (at_line_end(i)) add_thread(list, inst.x, start, i, best);
                return;
            case Regex::Op::Match:
                if (!best || start < best->begin ||
                    (start == best->begin && i > best->end))
                    best = Match{start, i};
                return;
            case Regex::Op::Class:
                list.push_back({pc, start});
                return;
        }
    }

    // Leftmost match starting at or after `from`, longest end for that start.
    // New start threads stop being injected once any match is known, because
    // later starts can never beat an earlier one.
    std::optional<Match> search(std::size_t entry, std::size_t from) {
        std::vector<Thread> runnable, next;
        std::optional<Match> best;
        std::size_t i = from;
        while (true) {
            ++gen;
            next.clear();
            for (const auto& t : runnable) {
                if (best && t.start > best->begin) continue;
                add_thread(next, t.pc, t.start, i, best);
            }
            if (!best) add_thread(next, entry, i, i, best);
            if (i >= text.size() || (next.empty() && best)) break;
            unsigned char c = static_cast<unsigned char>(text[i]);
            runnable.clear();
            for (const auto& t : next) {
                const auto& inst = prog[t.pc];
                if (inst.cls.test(c)) runnable.push_back({inst.x, t.start});
            }
            ++i;
        }
        return best;
    }
};

Regex Regex::compile(std::string_view pattern) {
    Regex re;
    re.pattern_ = std::string(pattern);
    Compiler compiler{pattern, 0, re.prog_, 0};
    compiler.compile();
    re.entry_ = compiler.entry;
    return re;
}

std::optional<Match> Regex::find(std::string_view text, std::size_t from) const {
    if (from > text.size()) return std::nullopt;
    Vm vm(prog_, text);
    return vm.search(entry_, from);
}

std::vector<Match> Regex::find_all(std::string_view text, std::size_t limit) const {
    std::vector<Match> out;
    std::size_t from = 0;
    while (out.size() < limit) {
        auto m = find(text, from);
        if (!m) break;
        out.push_back(*m);
        from = (m->end > m->begin) ? m->end : m->begin + 1;
        if (from > text.size()) break;
    }
    return out;
}

} // namespace lexeval::rx
