import pytest
from hypothesis import given
from hypothesis import strategies as st

from reason_forge.linear import InexactDivision, LinearValue, NonLinearExpression

lv = st.builds(LinearValue, st.integers(-9, 9), st.integers(-100, 100))
xs = st.integers(-50, 50)


def test_constructors():
    assert LinearValue.of(7) == LinearValue(0, 7)
    assert LinearValue.unknown() == LinearValue(1, 0)
    assert LinearValue.of(7).is_numeric
    assert not LinearValue.unknown().is_numeric


def test_arithmetic_examples():
    x = LinearValue.unknown()
    v = x.add(x.add(LinearValue.of(2)))  # x + (x + 2)
    assert v == LinearValue(2, 2)
    assert v.add(LinearValue.of(16)) == LinearValue(2, 18)
    assert v.scale(3) == LinearValue(6, 6)
    assert LinearValue(2, 18).sub(LinearValue.of(18)) == LinearValue(2, 0)
    assert LinearValue(2, 4).div(LinearValue.of(2)) == LinearValue(1, 2)


def test_nonlinear_and_inexact_rejected():
    x = LinearValue.unknown()
    with pytest.raises(NonLinearExpression):
        x.mul(x)
    with pytest.raises(NonLinearExpression):
        LinearValue.of(3).div(x)
    with pytest.raises(InexactDivision):
        LinearValue(2, 3).div(LinearValue.of(2))
    with pytest.raises(InexactDivision):
        LinearValue.of(3).div(LinearValue.of(0))


def test_render_forms():
    assert LinearValue(0, 7).render() == "7"
    assert LinearValue(1, 0).render() == "x"
    assert LinearValue(2, 18).render() == "2x + 18"
    assert LinearValue(-2, 30).render() == "30 - 2x"
    assert LinearValue(-1, 30).render() == "30 - x"
    assert LinearValue(2, -4).render() == "2x - 4"
    assert LinearValue(1, 3).render("y") == "y + 3"


@given(a=lv, b=lv, x=xs)
def test_add_sub_resolve_homomorphism(a, b, x):
    """resolve distributes over add/sub."""
    assert a.add(b).resolve(x) == a.resolve(x) + b.resolve(x)
    assert a.sub(b).resolve(x) == a.resolve(x) - b.resolve(x)
    assert a.neg().resolve(x) == -a.resolve(x)


@given(a=lv, k=st.integers(-9, 9), x=xs)
def test_scale_resolve_homomorphism(a, k, x):
    assert a.scale(k).resolve(x) == k * a.resolve(x)
    assert a.mul(LinearValue.of(k)).resolve(x) == k * a.resolve(x)


@given(a=lv, d=st.integers(1, 9), x=xs)
def test_exact_division_inverts_scale(a, d, x):
    assert a.scale(d).div(LinearValue.of(d)) == a
    assert a.scale(d).div(LinearValue.of(d)).resolve(x) == a.resolve(x)
