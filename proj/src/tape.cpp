#include "tsadapt/tape.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace tsadapt::optim {

namespace {

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw std::invalid_argument(std::string(op) + ": shape mismatch " + a.shape_str() +
                                    " vs " + b.shape_str());
    }
}

}  // namespace

Tape::NodeId Tape::push(Node n) {
    n.grad = Matrix(n.value.rows(), n.value.cols(), 0.0);
    nodes_.push_back(std::move(n));
    return nodes_.size() - 1;
}

void Tape::check_id(NodeId id) const {
    if (id >= nodes_.size()) throw std::invalid_argument("tape: unknown node id");
}

Tape::NodeId Tape::leaf(Matrix value) {
    Node n;
    n.op = Op::leaf;
    n.value = std::move(value);
    return push(std::move(n));
}

Tape::NodeId Tape::matmul(NodeId a, NodeId b) {
    check_id(a);
    check_id(b);
    Node n;
    n.op = Op::matmul;
    n.a = a;
    n.b = b;
    n.value = num::matmul(nodes_[a].value, nodes_[b].value);
    return push(std::move(n));
}

Tape::NodeId Tape::add(NodeId a, NodeId b) {
    check_id(a);
    check_id(b);
    require_same_shape(nodes_[a].value, nodes_[b].value, "tape add");
    Node n;
    n.op = Op::add;
    n.a = a;
    n.b = b;
    n.value = nodes_[a].value;
    n.value += nodes_[b].value;
    return push(std::move(n));
}

Tape::NodeId Tape::sub(NodeId a, NodeId b) {
    check_id(a);
    check_id(b);
    require_same_shape(nodes_[a].value, nodes_[b].value, "tape sub");
    Node n;
    n.op = Op::sub;
    n.a = a;
    n.b = b;
    n.value = nodes_[a].value;
    n.value -= nodes_[b].value;
    return push(std::move(n));
}

Tape::NodeId Tape::mul(NodeId a, NodeId b) {
    check_id(a);
    check_id(b);
    require_same_shape(nodes_[a].value, nodes_[b].value, "tape mul");
    Node n;
    n.op = Op::mul;
    n.a = a;
    n.b = b;
    n.value = num::hadamard(nodes_[a].value, nodes_[b].value);
    return push(std::move(n));
}

Tape::NodeId Tape::scale(NodeId a, double c) {
    check_id(a);
    Node n;
    n.op = Op::scale;
    n.a = a;
    n.c0 = c;
    n.value = nodes_[a].value;
    n.value *= c;
    return push(std::move(n));
}

Tape::NodeId Tape::add_scalar(NodeId a, double c) {
    check_id(a);
    Node n;
    n.op = Op::add_scalar;
    n.a = a;
    n.c0 = c;
    n.value = nodes_[a].value;
    for (std::size_t i = 0; i < n.value.rows(); ++i)
        for (std::size_t j = 0; j < n.value.cols(); ++j) n.value(i, j) += c;
    return push(std::move(n));
}

Tape::NodeId Tape::add_row_broadcast(NodeId a, NodeId row) {
    check_id(a);
    check_id(row);
    const Matrix& av = nodes_[a].value;
    const Matrix& rv = nodes_[row].value;
    if (rv.rows() != 1 || rv.cols() != av.cols()) {
        throw std::invalid_argument("tape add_row_broadcast: row must be 1x" +
                                    std::to_string(av.cols()) + ", got " + rv.shape_str());
    }
    Node n;
    n.op = Op::add_row_broadcast;
    n.a = a;
    n.b = row;
    n.value = av;
    for (std::size_t i = 0; i < av.rows(); ++i)
        for (std::size_t j = 0; j < av.cols(); ++j) n.value(i, j) += rv(0, j);
    return push(std::move(n));
}

Tape::NodeId Tape::add_col_broadcast(NodeId a, NodeId col) {
    check_id(a);
    check_id(col);
    const Matrix& av = nodes_[a].value;
    const Matrix& cv = nodes_[col].value;
    if (cv.cols() != 1 || cv.rows() != av.rows()) {
        throw std::invalid_argument("tape add_col_broadcast: col must be " +
                                    std::to_string(av.rows()) + "x1, got " + cv.shape_str());
    }
    Node n;
    n.op = Op::add_col_broadcast;
    n.a = a;
    n.b = col;
    n.value = av;
    for (std::size_t i = 0; i < av.rows(); ++i)
        for (std::size_t j = 0; j < av.cols(); ++j) n.value(i, j) += cv(i, 0);
    return push(std::move(n));
}

Tape::NodeId Tape::mul_row_broadcast(NodeId a, NodeId row) {
    check_id(a);
    check_id(row);
    const Matrix& av = nodes_[a].value;
    const Matrix& rv = nodes_[row].value;
    if (rv.rows() != 1 || rv.cols() != av.cols()) {
        throw std::invalid_argument("tape mul_row_broadcast: row must be 1x" +
                                    std::to_string(av.cols()) + ", got " + rv.shape_str());
    }
    Node n;
    n.op = Op::mul_row_broadcast;
    n.a = a;
    n.b = row;
    n.value = av;
    for (std::size_t i = 0; i < av.rows(); ++i)
        for (std::size_t j = 0; j < av.cols(); ++j) n.value(i, j) *= rv(0, j);
    return push(std::move(n));
}

Tape::NodeId Tape::relu(NodeId a) {
    check_id(a);
    Node n;
    n.op = Op::relu;
    n.a = a;
    n.value = nodes_[a].value;
    for (std::size_t i = 0; i < n.value.rows(); ++i)
        for (std::size_t j = 0; j < n.value.cols(); ++j)
            if (n.value(i, j) < 0.0) n.value(i, j) = 0.0;
    return push(std::move(n));
}

Tape::NodeId Tape::exp(NodeId a) {
    check_id(a);
    Node n;
    n.op = Op::exp;
    n.a = a;
    n.value = nodes_[a].value;
    for (std::size_t i = 0; i < n.value.rows(); ++i)
        for (std::size_t j = 0; j < n.value.cols(); ++j) n.value(i, j) = std::exp(n.value(i, j));
    return push(std::move(n));
}

Tape::NodeId Tape::transpose(NodeId a) {
    check_id(a);
    Node n;
    n.op = Op::transpose;
    n.a = a;
    n.value = nodes_[a].value.transpose();
    return push(std::move(n));
}

Tape::NodeId Tape::clamp(NodeId a, double lo, double hi) {
    check_id(a);
    if (!(lo <= hi)) throw std::invalid_argument("tape clamp: lo must not exceed hi");
    Node n;
    n.op = Op::clamp;
    n.a = a;
    n.c0 = lo;
    n.c1 = hi;
    n.value = nodes_[a].value;
    for (std::size_t i = 0; i < n.value.rows(); ++i)
        for (std::size_t j = 0; j < n.value.cols(); ++j) {
            if (n.value(i, j) < lo) n.value(i, j) = lo;
            if (n.value(i, j) > hi) n.value(i, j) = hi;
        }
    return push(std::move(n));
}

Tape::NodeId Tape::sum(NodeId a) {
    check_id(a);
    Node n;
    n.op = Op::sum;
    n.a = a;
    n.value = Matrix(1, 1, nodes_[a].value.sum());
    return push(std::move(n));
}

Tape::NodeId Tape::gaussian_sample(NodeId mu, NodeId log_var, Matrix noise) {
    check_id(mu);
    check_id(log_var);
    const Matrix& mv = nodes_[mu].value;
    const Matrix& lv = nodes_[log_var].value;
    require_same_shape(mv, lv, "tape gaussian_sample");
    require_same_shape(mv, noise, "tape gaussian_sample noise");
    Node n;
    n.op = Op::gaussian_sample;
    n.a = mu;
    n.b = log_var;
    n.value = mv;
    for (std::size_t i = 0; i < mv.rows(); ++i)
        for (std::size_t j = 0; j < mv.cols(); ++j)
            n.value(i, j) += std::exp(0.5 * lv(i, j)) * noise(i, j);
    n.aux = std::move(noise);
    return push(std::move(n));
}

const Matrix& Tape::value(NodeId id) const {
    check_id(id);
    return nodes_[id].value;
}

const Matrix& Tape::grad(NodeId id) const {
    check_id(id);
    if (!ran_backward_) throw std::logic_error("tape: grad requested before backward()");
    return nodes_[id].grad;
}

void Tape::backward(NodeId loss) {
    check_id(loss);
    const Matrix& lv = nodes_[loss].value;
    if (lv.rows() != 1 || lv.cols() != 1) {
        throw std::invalid_argument("tape backward: loss must be 1x1, got " + lv.shape_str());
    }
    if (ran_backward_) throw std::logic_error("tape backward: already ran on this tape");
    ran_backward_ = true;
    nodes_[loss].grad(0, 0) = 1.0;

    for (std::size_t idx = nodes_.size(); idx-- > 0;) {
        Node& n = nodes_[idx];
        const Matrix& g = n.grad;
        if (g.max_abs() == 0.0) continue;
        switch (n.op) {
            case Op::leaf:
                break;
            case Op::matmul: {
                nodes_[n.a].grad += num::matmul(g, nodes_[n.b].value.transpose());
                nodes_[n.b].grad += num::matmul(nodes_[n.a].value.transpose(), g);
                break;
            }
            case Op::add:
                nodes_[n.a].grad += g;
                nodes_[n.b].grad += g;
                break;
            case Op::sub:
                nodes_[n.a].grad += g;
                nodes_[n.b].grad -= g;
                break;
            case Op::mul:
                nodes_[n.a].grad += num::hadamard(g, nodes_[n.b].value);
                nodes_[n.b].grad += num::hadamard(g, nodes_[n.a].value);
                break;
            case Op::scale: {
                Matrix sg = g;
                sg *= n.c0;
                nodes_[n.a].grad += sg;
                break;
            }
            case Op::add_scalar:
                nodes_[n.a].grad += g;
                break;
            case Op::add_row_broadcast: {
                nodes_[n.a].grad += g;
                Matrix& rg = nodes_[n.b].grad;
                for (std::size_t i = 0; i < g.rows(); ++i)
                    for (std::size_t j = 0; j < g.cols(); ++j) rg(0, j) += g(i, j);
                break;
            }
            case Op::add_col_broadcast: {
                nodes_[n.a].grad += g;
                Matrix& cg = nodes_[n.b].grad;
                for (std::size_t i = 0; i < g.rows(); ++i)
                    for (std::size_t j = 0; j < g.cols(); ++j) cg(i, 0) += g(i, j);
                break;
            }
            case Op::mul_row_broadcast: {
                const Matrix& av = nodes_[n.a].value;
                const Matrix& rv = nodes_[n.b].value;
                Matrix& ag = nodes_[n.a].grad;
                Matrix& rg = nodes_[n.b].grad;
                for (std::size_t i = 0; i < g.rows(); ++i)
                    for (std::size_t j = 0; j < g.cols(); ++j) {
                        ag(i, j) += g(i, j) * rv(0, j);
                        rg(0, j) += g(i, j) * av(i, j);
                    }
                break;
            }
            case Op::relu: {
                const Matrix& av = nodes_[n.a].value;
                Matrix& ag = nodes_[n.a].grad;
                for (std::size_t i = 0; i < g.rows(); ++i)
                    for (std::size_t j = 0; j < g.cols(); ++j)
                        if (av(i, j) > 0.0) ag(i, j) += g(i, j);
                break;
            }
            case Op::exp:
                nodes_[n.a].grad += num::hadamard(g, n.value);
                break;
            case Op::transpose:
                nodes_[n.a].grad += g.transpose();
                break;
            case Op::clamp: {
                const Matrix& av = nodes_[n.a].value;
                Matrix& ag = nodes_[n.a].grad;
                for (std::size_t i = 0; i < g.rows(); ++i)
                    for (std::size_t j = 0; j < g.cols(); ++j)
                        if (av(i, j) > n.c0 && av(i, j) < n.c1) ag(i, j) += g(i, j);
                break;
            }
            case Op::sum: {
                const double s = g(0, 0);
                Matrix& ag = nodes_[n.a].grad;
                for (std::size_t i = 0; i < ag.rows(); ++i)
                    for (std::size_t j = 0; j < ag.cols(); ++j) ag(i, j) += s;
                break;
            }
            case Op::gaussian_sample: {
                const Matrix& lv2 = nodes_[n.b].value;
                Matrix& mg = nodes_[n.a].grad;
                Matrix& lg = nodes_[n.b].grad;
                for (std::size_t i = 0; i < g.rows(); ++i)
                    for (std::size_t j = 0; j < g.cols(); ++j) {
                        mg(i, j) += g(i, j);
                        lg(i, j) += g(i, j) * 0.5 * std::exp(0.5 * lv2(i, j)) * n.aux(i, j);
                    }
                break;
            }
        }
    }
}

}  // namespace tsadapt::optim
