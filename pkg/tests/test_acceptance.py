"""End-to-end acceptance checks, one test per criterion.

Each test prints a single ``PASS`` or ``FAIL`` line with its measurements and wall time.
Run directly with ``python tests/test_acceptance.py`` or through pytest.
"""

import time
from fractions import Fraction

import numpy as np
import pytest
from PIL import Image

from gradcheck import numeric_grad, rel_error
from quantum_oracle import cry, dense_funnel4
from qdeepfake.data import (
    DEFAULT_CLASSES,
    ImageRecord,
    Manifest,
    SplitSpec,
    balance,
    ingest,
    render_sign,
    split,
    split_sizes,
    synth_signs,
)
from qdeepfake.detectors import (
    DetectorBank,
    TrainConfig,
    build_classical_cnn,
    build_hybrid,
    build_resnet9,
    evaluate,
    evaluate_two_stage,
    joint_label,
    predict,
    train,
)
from qdeepfake.gan import (
    AttackConfig,
    Critic,
    GanTrainConfig,
    GanTrainer,
    Generator,
    MlpCritic,
    MlpGenerator,
    attack,
    energy_distance,
    gradient_penalty,
    objective,
    objective_bound,
    toy_networks,
    toy_samples,
)
from qdeepfake.metrics import confusion, count_params, dense_param_count, memory_mb, metrics
from qdeepfake.quantum.qcnn import (
    DEFAULT_TOPOLOGY,
    QcnnParams,
    funnel_topology,
    qcnn_grad_fd,
    qcnn_grad_shift,
    qcnn_state,
)
from qdeepfake.quantum.statevector import StateVector, apply_rotation, apply_two_qubit
from qdeepfake.seeding import stream
from qdeepfake.tensor import (
    BatchNormState,
    Tensor,
    activation,
    batchnorm2d,
    conv2d,
    conv_transpose2d,
    cross_entropy,
    dropout,
    grad,
    linear,
    maxpool2d,
    nn,
    no_grad,
)


def verdict(capsys, n, title, checks, detail, started, limit):
    elapsed = time.perf_counter() - started
    checks = dict(checks, runtime=elapsed < limit)
    failed = [k for k, ok in checks.items() if not ok]
    line = f"{'PASS' if not failed else 'FAIL'} criterion {n} {title}: {detail}; {elapsed:.1f} s (limit {limit} s)"
    if failed:
        line += f"; failed: {', '.join(failed)}"
    with capsys.disabled():
        print("\n" + line)
    assert not failed, line


# -- 1 ----------------------------------------------------------------------------


def test_criterion_1_cnn_parameter_table(capsys):
    t0 = time.perf_counter()
    counts = (17_346, 27_778, 97_794, 391_426, 1_571_586)
    mbs = (0.066, 0.106, 0.373, 1.493, 5.995)
    got = [count_params(build_classical_cnn(d)) for d in range(1, 6)]
    got_mb = [memory_mb(n) for n in got]
    verdict(capsys, 1, "CNN parameter table", {"counts": got == list(counts), "memory": got_mb == list(mbs)},
            f"counts {got}, MB {got_mb}", t0, 1)


# -- 2 ----------------------------------------------------------------------------


def test_criterion_2_hybrid_accounting(capsys):
    t0 = time.perf_counter()
    model = build_hybrid(seed=0)
    head = count_params(model.fc1) + count_params(model.fc2)
    per_circuit = model.angles.shape[1]
    total = count_params(model)
    gap = total - 5_425
    # the published total would need (5,425 - 4,202) / 32 parameters per circuit
    needed = Fraction(5_425 - 4_202, 32)
    prime = all((5_425 - 4_202) % k for k in range(2, int((5_425 - 4_202) ** 0.5) + 1))
    checks = {"head": head == dense_param_count([32, 120, 2]) == 4_202, "per_circuit": per_circuit == 57,
              "circuit_topology": DEFAULT_TOPOLOGY.n_params == 57, "total": total == 32 * 57 + 4_202 == 6_026,
              "irreconcilable": needed.denominator != 1 and prime}
    verdict(capsys, 2, "hybrid accounting", checks,
            f"head {head}, per circuit {per_circuit}, total {total} vs published 5,425 "
            f"(gap {gap}; 1,223 / 32 = {float(needed):.4f}, 1,223 prime: {prime})", t0, 1)


# -- 3 ----------------------------------------------------------------------------


def test_criterion_3_quantum_correctness(capsys):
    t0 = time.perf_counter()
    rng = np.random.default_rng(30)
    n = 12
    amps = rng.standard_normal(2**n) + 1j * rng.standard_normal(2**n)
    s = StateVector(n, amps / np.linalg.norm(amps))
    for _ in range(10_000):
        if rng.random() < 0.5:
            s = apply_rotation(s, "yz"[rng.integers(2)], int(rng.integers(1, n + 1)), rng.uniform(-np.pi, np.pi))
        else:
            qa, qb = rng.choice(np.arange(1, n + 1), 2, replace=False)
            s = apply_two_qubit(s, cry(rng.uniform(-np.pi, np.pi)), int(qa), int(qb))
    drift = abs(s.norm_squared() - 1)

    topo = funnel_topology(4)
    dense_err = 0.0
    for _ in range(20):
        theta = rng.uniform(-np.pi, np.pi, topo.n_params)
        x = rng.standard_normal(16)
        ref = dense_funnel4(theta) @ (x / np.linalg.norm(x))
        dense_err = max(dense_err, np.abs(qcnn_state(x, theta, topo).amplitudes - ref).max())

    grad_err = 0.0
    for _ in range(100):
        x = rng.standard_normal(3072)
        p = QcnnParams.random(rng)
        grad_err = max(grad_err, np.abs(qcnn_grad_shift(x, p) - qcnn_grad_fd(x, p)).max())
    checks = {"norm": drift <= 1e-9, "dense": dense_err <= 1e-10, "shift_vs_fd": grad_err <= 1e-6}
    verdict(capsys, 3, "quantum correctness", checks,
            f"norm drift {drift:.1e} over 10^4 gates, dense oracle {dense_err:.1e}, "
            f"shift vs FD {grad_err:.1e} over 100 draws", t0, 120)


# -- 4 ----------------------------------------------------------------------------


def _projected_error(op, arrays, rng, eps=1e-5):
    """Tape gradient of sum(op(*xs) * R) against central differences, worst over all inputs."""
    with no_grad():
        proj = rng.standard_normal(op(*[Tensor(a) for a in arrays]).shape)

    def scalar(*arrs):
        with no_grad():
            return float((op(*[Tensor(a) for a in arrs]).data * proj).sum())

    ts = [Tensor(a.copy(), requires_grad=True) for a in arrays]
    grads = grad((op(*ts) * Tensor(proj)).sum(), ts)
    return max(rel_error(g.data, numeric_grad(scalar, [a.copy() for a in arrays], i, eps))
               for i, g in enumerate(grads))


def _off_kink(rng, shape, margin=0.05):
    x = rng.standard_normal(shape)
    x[np.abs(x) < margin] += 2 * margin
    return x


def _bn(x, g, b):
    return batchnorm2d(x, BatchNormState(g, b, np.zeros(g.shape[0]), np.ones(g.shape[0])))


OP_CASES = {
    "conv2d": (1e-4, lambda r: [r.standard_normal((2, 3, 8, 8)), r.standard_normal((2, 3, 3, 3)), r.standard_normal(2)],
               lambda x, w, b: conv2d(x, w, b)),
    "conv_transpose2d": (1e-4, lambda r: [r.standard_normal((2, 3, 3, 3)), r.standard_normal((3, 2, 4, 4)),
                                          r.standard_normal(2)],
                         lambda x, w, b: conv_transpose2d(x, w, b)),
    "batchnorm2d": (1e-3, lambda r: [r.standard_normal((4, 2, 4, 4)), r.standard_normal(2), r.standard_normal(2)], _bn),
    "maxpool2d": (1e-4, lambda r: [r.permutation(16).reshape(1, 1, 4, 4).astype(np.float64) + r.uniform(0, 0.5, (1, 1, 4, 4))],
                  lambda x: maxpool2d(x)),
    "linear": (1e-5, lambda r: [r.standard_normal((3, 5)), r.standard_normal((5, 2)), r.standard_normal(2)],
               lambda x, w, b: linear(x, w, b)),
    "relu": (1e-5, lambda r: [_off_kink(r, 20)], lambda x: activation("relu", x)),
    "leaky_relu": (1e-5, lambda r: [_off_kink(r, 20)], lambda x: activation("leaky_relu", x)),
    "tanh": (1e-5, lambda r: [r.standard_normal(20)], lambda x: activation("tanh", x)),
    "sigmoid": (1e-5, lambda r: [r.standard_normal(20)], lambda x: activation("sigmoid", x)),
    "dropout": (1e-5, lambda r: [r.standard_normal((4, 5))], lambda x: dropout(x, 0.2, seed=3)),
    "cross_entropy": (1e-5, lambda r: [r.standard_normal((4, 3))], lambda x: cross_entropy(x, [0, 2, 1, 2])),
}


def _composite_error(rng):
    net = nn.Sequential(nn.Conv2d(2, 3, rng=rng, dtype=np.float64), nn.BatchNorm2d(3, dtype=np.float64), nn.ReLU(),
                        nn.MaxPool2d(2), nn.Flatten(), nn.Linear(12, 2, rng=rng, dtype=np.float64))
    x = rng.standard_normal((3, 2, 4, 4))
    labels = rng.integers(0, 2, 3)
    params = list(net.named_parameters().values())
    analytic = grad(cross_entropy(net(Tensor(x)), labels), params)

    def f(*_):
        with no_grad():
            return cross_entropy(net(Tensor(x)), labels).item()

    a = np.concatenate([g.data.ravel() for g in analytic])
    num = np.concatenate([numeric_grad(f, [p.data], 0).ravel() for p in params])
    return rel_error(a, num)


def _penalty_error(rng):
    critic = MlpCritic(4, hidden=(6, 5), seed=int(rng.integers(2**31)))
    x, g = rng.standard_normal((5, 4)), rng.standard_normal((5, 4))
    params = list(critic.named_parameters().values())
    analytic = np.concatenate([a.data.ravel() for a in grad(gradient_penalty(critic, x, g, 1), params)])

    def f(*_):
        return gradient_penalty(critic, x, g, 1).item()

    num = np.concatenate([numeric_grad(f, [p.data], 0).ravel() for p in params])
    return rel_error(analytic, num)


def test_criterion_4_differentiation(capsys):
    t0 = time.perf_counter()
    rng = np.random.default_rng(40)
    worst, checks = {}, {}
    for name, (tol, make, op) in OP_CASES.items():
        worst[name] = max(_projected_error(op, make(rng), rng) for _ in range(50))
        checks[name] = worst[name] <= tol
    worst["composite"] = max(_composite_error(rng) for _ in range(50))
    checks["composite"] = worst["composite"] <= 1e-3
    worst["gradient_penalty"] = max(_penalty_error(rng) for _ in range(50))
    checks["gradient_penalty"] = worst["gradient_penalty"] <= 1e-3
    detail = ", ".join(f"{k} {v:.1e}" for k, v in worst.items())
    verdict(capsys, 4, "differentiation", checks, f"worst relative error over 50 instances: {detail}", t0, 120)


# -- 5 ----------------------------------------------------------------------------


def _mini_images(n=200, size=8):
    out = []
    for i in range(n):
        rgb = render_sign(DEFAULT_CLASSES[i % 10], i % 3 == 0, stream(0, "mini", i))
        small = Image.fromarray(rgb).resize((size, size), Image.Resampling.BILINEAR)
        out.append(np.asarray(small, np.float64).transpose(2, 0, 1) / 127.5 - 1)
    return np.stack(out)


def test_criterion_5_attack_fidelity(capsys):
    t0 = time.perf_counter()
    data = _mini_images()
    generator = MlpGenerator(2, (3, 8, 8), hidden=(32,), seed=0)
    critic = MlpCritic(192, hidden=(64, 64), seed=0)
    GanTrainer(data, GanTrainConfig(steps=300, batch_size=32, seed=0), generator, critic).run()
    axis = np.linspace(-3, 3, 101)
    zz = np.stack(np.meshgrid(axis, axis, indexing="ij"), -1).reshape(-1, 2)
    rng = np.random.default_rng(1)
    ratios, monotone = [], True
    for k in range(20):
        x = data[rng.integers(len(data))] if k % 2 else rng.uniform(-1, 1, (3, 8, 8))
        best_grid = objective(generator, zz, x).max()
        res = attack(x, generator, AttackConfig(seed=k))
        ratios.append(res.objective / best_grid)
        nested = [attack(x, generator, AttackConfig(restarts=r, seed=k)).objective for r in (1, 2, 4)]
        nested.append(res.objective)
        monotone &= all(a <= b for a, b in zip(nested, nested[1:])) and res.objective <= objective_bound(x)
    checks = {"grid_fraction": min(ratios) >= 0.95, "nested_monotone": monotone}
    verdict(capsys, 5, "attack fidelity", checks,
            f"worst attack/grid ratio {min(ratios):.4f} (mean {np.mean(ratios):.4f}) over 20 targets", t0, 60)


# -- 6 ----------------------------------------------------------------------------


def test_criterion_6_wgan_toy(capsys):
    t0 = time.perf_counter()
    seed = 1
    generator, critic = toy_networks(seed)
    real = toy_samples(1000, 5)
    z = np.random.default_rng(9).standard_normal((1000, 2))

    def energy():
        generator.eval()
        with no_grad():
            return energy_distance(generator(Tensor(z)).data, real)

    before = energy()
    trainer = GanTrainer(toy_samples(4000, 0), GanTrainConfig(steps=2000, batch_size=64, seed=seed), generator, critic)
    trainer.run()
    after = energy()
    norm = float(np.mean([r.grad_norm for r in trainer.history[-100:]]))
    checks = {"energy_drops": after < before, "grad_norm_band": 0.5 <= norm <= 1.5}
    verdict(capsys, 6, "WGAN-GP toy", checks,
            f"energy distance {before:.4f} -> {after:.4f}, mean critic grad norm (last 100) {norm:.3f}", t0, 300)


# -- 7 ----------------------------------------------------------------------------


def _train_accuracy(model, x, y):
    return evaluate(model, (x, y), 2)[1][3]  # (precision, recall, f1, accuracy)


def test_criterion_7_pipeline(tmp_path, capsys):
    t0 = time.perf_counter()
    checks, notes = {}, []
    synth_signs(tmp_path / "png", count=30, fake_count=30, seed=7)
    m = ingest(tmp_path / "png")
    checks["synth"] = m.warnings == 0 and set(m.counts().values()) == {(30, 30)} and len(m.classes) == 10
    balanced = balance(m, seed=7)
    train_m, val_m, test_m = split(balanced, SplitSpec(seed=7))
    checks["split_rule"] = all((len(train_m.by_class(c)), len(val_m.by_class(c)), len(test_m.by_class(c)))
                               == split_sizes(60) == (36, 12, 12) for c in m.classes)
    rng = np.random.default_rng(0)
    stop = Manifest([ImageRecord("STOP", i >= 100, rng.uniform(-1, 1, (3, 32, 32)).astype(np.float32), f"s{i}")
                     for i in range(177)])
    parts = split(balance(stop, seed=7), SplitSpec(seed=7))
    checks["floor_rule_154"] = [len(p) for p in parts] == [92, 30, 32]

    x_train, c_train, f_train = train_m.arrays()
    gan = GanTrainer(x_train, GanTrainConfig(steps=5, batch_size=16, seed=7),
                     Generator(width=0.25, seed=7), Critic(width=0.25, seed=7)).run()
    checks["gan"] = len(gan.history) == 5 and all(np.isfinite(r.critic_loss) for r in gan.history)
    x_test, c_test, f_test = test_m.arrays()
    attacked = [attack(x_test[i], gan.generator, AttackConfig(restarts=2, steps=10, seed=7)) for i in range(2)]
    checks["attack"] = all(a.objective <= objective_bound(x_test[i]) and np.abs(a.image).max() <= 1
                           for i, a in enumerate(attacked))
    notes.append(f"attack objectives {[round(a.objective, 1) for a in attacked]}")

    banks = {"cnn-1": DetectorBank(class_names=m.classes), "hybrid": DetectorBank(class_names=m.classes)}
    accs = {k: [] for k in banks}
    for c, label in enumerate(m.classes):
        xt, _, ft = train_m.arrays(label)
        xv, _, fv = val_m.arrays(label)
        cnn = train(build_classical_cnn(1, seed=0), (xt, ft), (xv, fv), TrainConfig(epochs=10, lr=1e-3)).model
        hyb = train(build_hybrid(seed=0), (xt, ft), (xv, fv), TrainConfig(epochs=8, lr=1e-2)).model
        for name, model in (("cnn-1", cnn), ("hybrid", hyb)):
            banks[name].add(c, model)
            accs[name].append(_train_accuracy(model, xt, ft))
    for name, values in accs.items():
        checks[f"{name}_train_accuracy"] = min(values) >= 0.90
        notes.append(f"{name} train accuracy min {min(values):.3f}")

    x_val, c_val, _ = val_m.arrays()
    classifier = train(build_resnet9(10, seed=0, width=16), (x_train, c_train), (x_val, c_val),
                       TrainConfig(epochs=4, lr=1e-3)).model
    classes = predict(classifier, x_test)
    notes.append(f"classifier test accuracy {np.mean(classes == c_test):.3f}")
    for name, bank in banks.items():
        res = evaluate_two_stage(x_test, c_test, f_test, classifier, bank, 10)
        # each stage run on its own over the whole split, then composed image by image
        per_detector = {c: predict(bank.get(c), x_test) for c in range(10)}
        flags = np.array([per_detector[int(c)][i] for i, c in enumerate(classes)])
        expected = np.zeros((20, 20), dtype=np.int64)
        np.add.at(expected, (joint_label(c_test, f_test), joint_label(classes, flags)), 1)
        checks[f"{name}_composition"] = np.array_equal(res.joint, expected) and np.array_equal(res.flags, flags)
        acc = metrics(sum(res.per_class.values())).accuracy
        notes.append(f"{name} two-stage test accuracy {acc:.3f}")
    verdict(capsys, 7, "desk-scale pipeline", checks, "; ".join(notes), t0, 1200)


# -- 8 ----------------------------------------------------------------------------


def _by_hand(pred, y):
    tp = sum(1 for p, t in zip(pred, y) if p == 1 and t == 1)
    fp = sum(1 for p, t in zip(pred, y) if p == 1 and t == 0)
    fn = sum(1 for p, t in zip(pred, y) if p == 0 and t == 1)
    tn = sum(1 for p, t in zip(pred, y) if p == 0 and t == 0)
    prec = tp / (tp + fp) if tp + fp else None
    rec = tp / (tp + fn) if tp + fn else None
    f1 = None if prec is None or rec is None or prec + rec == 0 else 2 * prec * rec / (prec + rec)
    acc = (tp + tn) / len(y) if len(y) else None
    return (tp, fp, fn, tn), (prec, rec, f1, acc)


def _same(a, b):
    return (a is None and b is None) or (a is not None and b is not None and abs(a - b) <= 1e-12)


def test_criterion_8_metric_identities(capsys):
    t0 = time.perf_counter()
    rng = np.random.default_rng(80)
    ok_counts = ok_scores = True
    undefined = 0
    for i in range(1000):
        tp, fp, fn, tn = rng.integers(0, 12, 4)
        if i % 5 == 0:
            tp, fp = 0, 0  # no positive predictions
        elif i % 5 == 1:
            tp, fn = 0, 0  # no positive labels
        elif i % 50 == 2:
            tp = fp = fn = tn = 0
        y = [1] * tp + [0] * fp + [1] * fn + [0] * tn
        pred = [1] * tp + [1] * fp + [0] * fn + [0] * tn
        order = rng.permutation(len(y))
        y, pred = [y[j] for j in order], [pred[j] for j in order]
        counts, expected = _by_hand(pred, y)
        cm = confusion(pred, y, 2)
        ok_counts &= (cm[1, 1], cm[0, 1], cm[1, 0], cm[0, 0]) == counts
        got = metrics(cm).as_tuple()
        ok_scores &= all(_same(a, b) for a, b in zip(got, expected))
        undefined += any(v is None for v in got)
    checks = {"counts": ok_counts, "scores": ok_scores, "undefined_exercised": undefined >= 100}
    verdict(capsys, 8, "metric identities", checks,
            f"1,000 random matrices, {undefined} with an undefined score", t0, 1)


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v"]))
