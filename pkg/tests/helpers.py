"""Shared test utilities: finite-difference gradient checks, image fixtures."""

import numpy as np
import torch


def fd_check_params(model, loss_fn, step=1e-4, rel_tol=1e-4,
                    max_coords_per_tensor=None, seed=0):
    """Compare analytic parameter gradients of loss_fn(model) against
    central finite differences in float64.

    loss_fn takes the model and returns a scalar tensor. Large tensors can
    be spot-checked at max_coords_per_tensor sampled coordinates. Returns
    the worst relative error seen.
    """
    model = model.double()
    model.eval()  # batch-norm statistics must stay frozen between evals
    for p in model.parameters():
        p.grad = None
    loss = loss_fn(model)
    loss.backward()
    rng = np.random.default_rng(seed)
    worst = 0.0
    for name, p in model.named_parameters():
        if p.grad is None:
            continue
        flat = p.detach().view(-1)
        grad = p.grad.detach().view(-1)
        n = flat.numel()
        if max_coords_per_tensor is None or n <= max_coords_per_tensor:
            coords = range(n)
        else:
            coords = rng.choice(n, size=max_coords_per_tensor, replace=False)
        for i in coords:
            orig = flat[i].item()

            def fd_at(h):
                with torch.no_grad():
                    flat[i] = orig + h
                up = loss_fn(model).item()
                with torch.no_grad():
                    flat[i] = orig - h
                down = loss_fn(model).item()
                with torch.no_grad():
                    flat[i] = orig
                return (up - down) / (2 * h)

            an = grad[i].item()

            def rel_at(h):
                fd = fd_at(h)
                return abs(fd - an) / max(abs(fd), abs(an), 1e-6), fd

            rel, fd = rel_at(step)
            if rel >= rel_tol:
                # wide steps straddle relu/clamp kinks, narrow steps lose
                # digits to cancellation; a correct gradient matches at some
                # step while a wrong one fails at every step, so retry both
                # directions before declaring a mismatch.
                for h in (step * 10, step / 10, step / 100):
                    r2, f2 = rel_at(h)
                    if r2 < rel:
                        rel, fd = r2, f2
                    if rel < rel_tol:
                        break
            worst = max(worst, rel)
            assert rel < rel_tol, (
                f"{name}[{i}]: analytic {an:.6e} vs fd {fd:.6e} "
                f"(rel {rel:.2e})")
    return worst


def fd_check_input(fn, x, step=1e-4, rel_tol=1e-4):
    """Gradient check of scalar fn(x) w.r.t. every coordinate of x (float64)."""
    x = x.detach().double().requires_grad_(True)
    loss = fn(x)
    loss.backward()
    grad = x.grad.detach().view(-1)
    flat = x.detach().view(-1)
    worst = 0.0
    for i in range(flat.numel()):
        orig = flat[i].item()

        def fd_at(h):
            with torch.no_grad():
                flat[i] = orig + h
            up = fn(x.detach()).item()
            with torch.no_grad():
                flat[i] = orig - h
            down = fn(x.detach()).item()
            with torch.no_grad():
                flat[i] = orig
            return (up - down) / (2 * h)

        an = grad[i].item()

        def rel_at(h):
            fd = fd_at(h)
            return abs(fd - an) / max(abs(fd), abs(an), 1e-6), fd

        rel, fd = rel_at(step)
        if rel >= rel_tol:
            # same retry policy as fd_check_params: see the comment there
            for h in (step * 10, step / 10, step / 100):
                r2, f2 = rel_at(h)
                if r2 < rel:
                    rel, fd = r2, f2
                if rel < rel_tol:
                    break
        worst = max(worst, rel)
        assert rel < rel_tol, (
            f"coord {i}: analytic {an:.6e} vs fd {fd:.6e} (rel {rel:.2e})")
    return worst


def structured_pair(seed=3, size=96):
    """Deterministic paired (low, high) scene with texture and gradients."""
    g = torch.Generator().manual_seed(seed)
    lin = torch.linspace(0, 1, size)
    yy, xx = torch.meshgrid(lin, lin, indexing="ij")
    base = torch.stack([
        0.4 + 0.4 * xx,
        0.3 + 0.5 * yy,
        0.5 + 0.3 * torch.sin(6.28 * xx) * torch.cos(6.28 * yy),
    ])
    noise = torch.rand((3, size, size), generator=g) * 0.1
    high = (base + noise).clamp(0.05, 0.95)
    low = (high * 0.15 + 0.02).clamp(0, 1)
    return low, high


def write_png(path, array_hw3):
    from PIL import Image
    Image.fromarray(np.asarray(array_hw3, dtype=np.uint8)).save(path)


def make_pair_dir(root, stems, size=16, seed=0):
    """Create a flat low/high paired dataset of random PNGs; returns root."""
    rng = np.random.default_rng(seed)
    low_dir = root / "low"
    high_dir = root / "high"
    low_dir.mkdir(parents=True, exist_ok=True)
    high_dir.mkdir(parents=True, exist_ok=True)
    for stem in stems:
        low = (rng.random((size, size, 3)) * 70).astype(np.uint8)
        high = np.clip(low.astype(int) * 3 + 30, 0, 255).astype(np.uint8)
        write_png(low_dir / f"{stem}.png", low)
        write_png(high_dir / f"{stem}.png", high)
    return root
