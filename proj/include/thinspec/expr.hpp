#pragma once

// Small complex-valued expression language for coefficient functions.
// Grammar: + - * / ^ (right-assoc), unary -, functions sin cos exp sqrt
// tanh sech, literals, `i`, `pi`, variables `x` and `xi`, named parameters.
// Trees are immutable after parse; eval is pure.

#include <cctype>
#include <charconv>
#include <cmath>
#include <complex>
#include <cstdio>
#include <cstring>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "thinspec/error.hpp"

namespace thinspec::expr {

using cplx = std::complex<double>;

enum class NodeKind { Num, Imag, Pi, VarX, VarXi, Param, Neg, Add, Sub, Mul, Div, Pow, Call };

enum class Fn { Sin, Cos, Exp, Sqrt, Tanh, Sech };

struct Node;
using ExprPtr = std::shared_ptr<const Node>;

struct Node {
    NodeKind kind;
    double value = 0.0;       // Num
    std::string name;         // Param
    Fn fn = Fn::Sin;          // Call
    ExprPtr a, b;             // operands
};

struct Expr {
    ExprPtr root;
    explicit operator bool() const { return static_cast<bool>(root); }
};

struct Env {
    double x = 0.0;
    double xi = 0.0;
    const std::map<std::string, double>* params = nullptr;
};

inline ExprPtr make(NodeKind k, ExprPtr a = nullptr, ExprPtr b = nullptr) {
    auto n = std::make_shared<Node>();
    n->kind = k;
    n->a = std::move(a);
    n->b = std::move(b);
    return n;
}

inline Expr number(double v) {
    auto n = std::make_shared<Node>();
    n->kind = NodeKind::Num;
    n->value = v;
    return Expr{n};
}

inline const char* fn_name(Fn f) {
    switch (f) {
        case Fn::Sin: return "sin";
        case Fn::Cos: return "cos";
        case Fn::Exp: return "exp";
        case Fn::Sqrt: return "sqrt";
        case Fn::Tanh: return "tanh";
        case Fn::Sech: return "sech";
    }
    return "?";
}

inline std::optional<Fn> fn_from_name(const std::string& s) {
    if (s == "sin") return Fn::Sin;
    if (s == "cos") return Fn::Cos;
    if (s == "exp") return Fn::Exp;
    if (s == "sqrt") return Fn::Sqrt;
    if (s == "tanh") return Fn::Tanh;
    if (s == "sech") return Fn::Sech;
    return std::nullopt;
}

// ---------------------------------------------------------------- parsing

namespace detail {

struct Parser {
    std::string_view src;
    std::size_t pos = 0;
    const std::set<std::string>* allowed = nullptr;

    [[noreturn]] void fail(const std::string& what) const {
        std::ostringstream os;
        os << "coeffexpr.parse: " << what << " at byte " << pos;
        throw parse_error(os.str(), pos);
    }

    void skip_ws() {
        while (pos < src.size() && (src[pos] == ' ' || src[pos] == '\t')) ++pos;
    }

    bool eat(char c) {
        skip_ws();
        if (pos < src.size() && src[pos] == c) {
            ++pos;
            return true;
        }
        return false;
    }

    char peek() {
        skip_ws();
        return pos < src.size() ? src[pos] : '\0';
    }

    ExprPtr parse_expr() {
        ExprPtr lhs = parse_term();
        for (;;) {
            if (eat('+'))
                lhs = make(NodeKind::Add, lhs, parse_term());
            else if (eat('-'))
                lhs = make(NodeKind::Sub, lhs, parse_term());
            else
                return lhs;
        }
    }

    ExprPtr parse_term() {
        ExprPtr lhs = parse_factor();
        for (;;) {
            if (eat('*'))
                lhs = make(NodeKind::Mul, lhs, parse_factor());
            else if (eat('/'))
                lhs = make(NodeKind::Div, lhs, parse_factor());
            else
                return lhs;
        }
    }

    // unary minus binds below ^ : -x^2 == -(x^2)
    ExprPtr parse_factor() {
        if (eat('-')) {
            ExprPtr inner = parse_factor();
            if (inner->kind == NodeKind::Num) {
                auto n = std::make_shared<Node>();
                n->kind = NodeKind::Num;
                n->value = -inner->value;
                return n;
            }
            return make(NodeKind::Neg, inner);
        }
        return parse_power();
    }

    ExprPtr parse_power() {
        ExprPtr base = parse_atom();
        if (eat('^')) return make(NodeKind::Pow, base, parse_factor());  // right-assoc
        return base;
    }

    ExprPtr parse_atom() {
        skip_ws();
        if (pos >= src.size())
            fail("unexpected end of input; expected number, '(', identifier, or function");
        char c = src[pos];
        if (c == '(') {
            ++pos;
            ExprPtr e = parse_expr();
            if (!eat(')')) fail("expected ')'");
            return e;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return parse_ident();
        fail(std::string("unexpected character '") + c + "'; expected number, '(', identifier, or function");
    }

    ExprPtr parse_number() {
        double v = 0.0;
        const char* begin = src.data() + pos;
        const char* end = src.data() + src.size();
        auto [ptr, ec] = std::from_chars(begin, end, v);
        if (ec != std::errc()) fail("malformed number");
        pos += static_cast<std::size_t>(ptr - begin);
        auto n = std::make_shared<Node>();
        n->kind = NodeKind::Num;
        n->value = v;
        return n;
    }

    ExprPtr parse_ident() {
        std::size_t start = pos;
        while (pos < src.size() &&
               (std::isalnum(static_cast<unsigned char>(src[pos])) || src[pos] == '_'))
            ++pos;
        std::string name(src.substr(start, pos - start));
        if (name == "i") return make(NodeKind::Imag);
        if (name == "pi") return make(NodeKind::Pi);
        if (name == "x") return make(NodeKind::VarX);
        if (name == "xi") return make(NodeKind::VarXi);
        if (auto f = fn_from_name(name)) {
            if (!eat('(')) fail("expected '(' after function " + name);
            ExprPtr arg = parse_expr();
            if (!eat(')')) fail("expected ')' closing call of " + name);
            auto n = std::make_shared<Node>();
            n->kind = NodeKind::Call;
            n->fn = *f;
            n->a = arg;
            return n;
        }
        if (allowed && !allowed->count(name)) {
            std::ostringstream os;
            os << "coeffexpr.parse: unknown identifier '" << name << "' at byte " << start
               << "; allowed names: i, pi, x, xi, sin, cos, exp, sqrt, tanh, sech";
            for (const auto& p : *allowed) os << ", " << p;
            throw parse_error(os.str(), start);
        }
        auto n = std::make_shared<Node>();
        n->kind = NodeKind::Param;
        n->name = name;
        return n;
    }
};

} // namespace detail

// Parse `src`; when `allowed_params` is given, any identifier outside the
// builtin set must appear in it.
inline Expr parse(std::string_view src, const std::set<std::string>* allowed_params = nullptr) {
    if (src.empty()) throw parse_error("coeffexpr.parse: empty expression", 0);
    detail::Parser p{src, 0, allowed_params};
    ExprPtr e = p.parse_expr();
    p.skip_ws();
    if (p.pos != src.size()) p.fail("trailing input; expected operator or end");
    return Expr{e};
}

inline Expr parse(std::string_view src, const std::set<std::string>& allowed_params) {
    return parse(src, &allowed_params);
}

// ---------------------------------------------------------------- printing

namespace detail {

// precedence levels: 0 add, 1 mul, 2 unary, 3 pow, 4 atom
inline int prec_of(NodeKind k) {
    switch (k) {
        case NodeKind::Add:
        case NodeKind::Sub: return 0;
        case NodeKind::Mul:
        case NodeKind::Div: return 1;
        case NodeKind::Neg: return 2;
        case NodeKind::Pow: return 3;
        default: return 4;
    }
}

inline void print_node(std::ostream& os, const ExprPtr& e, int parent_prec) {
    int prec = prec_of(e->kind);
    bool need_paren = prec < parent_prec;
    // negative literals act like unary-minus expressions precedence-wise
    if (e->kind == NodeKind::Num && e->value < 0) need_paren = 2 < parent_prec;
    if (need_paren) os << '(';
    switch (e->kind) {
        case NodeKind::Num: {
            char buf[32];
            std::snprintf(buf, sizeof buf, "%.17g", e->value);
            os << buf;
            break;
        }
        case NodeKind::Imag: os << 'i'; break;
        case NodeKind::Pi: os << "pi"; break;
        case NodeKind::VarX: os << 'x'; break;
        case NodeKind::VarXi: os << "xi"; break;
        case NodeKind::Param: os << e->name; break;
        case NodeKind::Neg:
            os << '-';
            print_node(os, e->a, 3);  // operand of '-' is a power-expression
            break;
        case NodeKind::Add:
            print_node(os, e->a, 0);
            os << '+';
            print_node(os, e->b, 1);
            break;
        case NodeKind::Sub:
            print_node(os, e->a, 0);
            os << '-';
            print_node(os, e->b, 1);
            break;
        case NodeKind::Mul:
            print_node(os, e->a, 1);
            os << '*';
            print_node(os, e->b, 2);
            break;
        case NodeKind::Div:
            print_node(os, e->a, 1);
            os << '/';
            print_node(os, e->b, 2);
            break;
        case NodeKind::Pow:
            print_node(os, e->a, 4);
            os << '^';
            print_node(os, e->b, 2);
            break;
        case NodeKind::Call:
            os << fn_name(e->fn) << '(';
            print_node(os, e->a, 0);
            os << ')';
            break;
    }
    if (need_paren) os << ')';
}

} // namespace detail

inline std::string print(const Expr& e) {
    std::ostringstream os;
    detail::print_node(os, e.root, 0);
    return os.str();
}

inline bool identical(const ExprPtr& a, const ExprPtr& b) {
    if (a->kind != b->kind) return false;
    switch (a->kind) {
        case NodeKind::Num: {
            // bit-identical doubles, so round trips are exact
            return std::memcmp(&a->value, &b->value, sizeof(double)) == 0;
        }
        case NodeKind::Param: return a->name == b->name;
        case NodeKind::Call: return a->fn == b->fn && identical(a->a, b->a);
        case NodeKind::Neg: return identical(a->a, b->a);
        case NodeKind::Add:
        case NodeKind::Sub:
        case NodeKind::Mul:
        case NodeKind::Div:
        case NodeKind::Pow: return identical(a->a, b->a) && identical(a->b, b->b);
        default: return true;
    }
}

inline bool identical(const Expr& a, const Expr& b) { return identical(a.root, b.root); }

// -------------------------------------------------------------- evaluation

namespace detail {

inline bool is_real(const cplx& z) { return z.imag() == 0.0; }

inline cplx eval_node(const ExprPtr& e, const Env& env) {
    switch (e->kind) {
        case NodeKind::Num: return cplx(e->value, 0.0);
        case NodeKind::Imag: return cplx(0.0, 1.0);
        case NodeKind::Pi: return cplx(3.14159265358979323846, 0.0);
        case NodeKind::VarX: return cplx(env.x, 0.0);
        case NodeKind::VarXi: return cplx(env.xi, 0.0);
        case NodeKind::Param: {
            if (env.params) {
                auto it = env.params->find(e->name);
                if (it != env.params->end()) return cplx(it->second, 0.0);
            }
            throw eval_error("coeffexpr.eval: unbound name '" + e->name + "'");
        }
        case NodeKind::Neg: return -eval_node(e->a, env);
        case NodeKind::Add: return eval_node(e->a, env) + eval_node(e->b, env);
        case NodeKind::Sub: return eval_node(e->a, env) - eval_node(e->b, env);
        case NodeKind::Mul: return eval_node(e->a, env) * eval_node(e->b, env);
        case NodeKind::Div: {
            cplx num = eval_node(e->a, env);
            cplx den = eval_node(e->b, env);
            if (den == cplx(0.0, 0.0)) {
                std::ostringstream os;
                os << "coeffexpr.eval: division by zero in '";
                print_node(os, e->b, 0);
                os << "'";
                throw eval_error(os.str());
            }
            return num / den;
        }
        case NodeKind::Pow: {
            cplx base = eval_node(e->a, env);
            cplx ex = eval_node(e->b, env);
            if (is_real(ex) && ex.real() == std::nearbyint(ex.real()) &&
                std::abs(ex.real()) <= 1024.0) {
                // exact integer powers by repeated squaring
                long n = static_cast<long>(ex.real());
                bool inv = n < 0;
                unsigned long k = inv ? static_cast<unsigned long>(-n) : static_cast<unsigned long>(n);
                cplx acc(1.0, 0.0), p = base;
                while (k) {
                    if (k & 1) acc *= p;
                    p *= p;
                    k >>= 1;
                }
                if (inv) {
                    if (acc == cplx(0.0, 0.0))
                        throw eval_error("coeffexpr.eval: zero base raised to negative power");
                    return cplx(1.0, 0.0) / acc;
                }
                return acc;
            }
            if (is_real(base) && base.real() < 0.0 && is_real(ex)) {
                std::ostringstream os;
                os << "coeffexpr.eval: non-integer power of negative real base in '";
                print_node(os, e, 0);
                os << "'";
                throw eval_error(os.str());
            }
            return std::pow(base, ex);
        }
        case NodeKind::Call: {
            cplx v = eval_node(e->a, env);
            switch (e->fn) {
                case Fn::Sin: return std::sin(v);
                case Fn::Cos: return std::cos(v);
                case Fn::Exp: return std::exp(v);
                case Fn::Sqrt: return std::sqrt(v);
                case Fn::Tanh: return std::tanh(v);
                case Fn::Sech: return cplx(1.0, 0.0) / std::cosh(v);
            }
        }
    }
    throw eval_error("coeffexpr.eval: corrupt tree");
}

} // namespace detail

inline cplx eval(const Expr& e, const Env& env) { return detail::eval_node(e.root, env); }

inline cplx eval(const Expr& e, double x, double xi,
                 const std::map<std::string, double>& params) {
    return detail::eval_node(e.root, Env{x, xi, &params});
}

// Row-major |xs| x |xis| grid of values; element (a,b) is eval at (xs[a], xis[b]).
inline std::vector<cplx> eval_grid(const Expr& e, const std::vector<double>& xs,
                                   const std::vector<double>& xis,
                                   const std::map<std::string, double>& params) {
    std::vector<cplx> out(xs.size() * xis.size());
    for (std::size_t a = 0; a < xs.size(); ++a)
        for (std::size_t b = 0; b < xis.size(); ++b) {
            try {
                out[a * xis.size() + b] = eval(e, xs[a], xis[b], params);
            } catch (const eval_error& err) {
                std::ostringstream os;
                os << err.what() << " [grid indices (" << a << "," << b << ")]";
                throw eval_error(os.str());
            }
        }
    return out;
}

// Structural scans used by model validation.
inline bool uses_node(const ExprPtr& e, NodeKind k) {
    if (e->kind == k) return true;
    if (e->a && uses_node(e->a, k)) return true;
    if (e->b && uses_node(e->b, k)) return true;
    return false;
}

inline bool uses_xi(const Expr& e) { return uses_node(e.root, NodeKind::VarXi); }

inline void collect_params(const ExprPtr& e, std::set<std::string>& out) {
    if (e->kind == NodeKind::Param) out.insert(e->name);
    if (e->a) collect_params(e->a, out);
    if (e->b) collect_params(e->b, out);
}

inline std::set<std::string> free_params(const Expr& e) {
    std::set<std::string> s;
    collect_params(e.root, s);
    return s;
}

} // namespace thinspec::expr
