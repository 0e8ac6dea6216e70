import io
import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kquad import CHSH_MATRIX, WORKED_MATRIX, IntegerMatrix, SignAssignment, manhattan_norm, value
from kquad.matrix import EXACT_LIMIT, MatrixParseError, from_text, read_matrix, write_matrix

small_matrices = st.integers(1, 5).flatmap(
    lambda n: st.integers(1, 6).flatmap(
        lambda m: st.lists(
            st.lists(st.integers(-50, 50), min_size=m, max_size=m), min_size=n, max_size=n
        )
    )
)


@pytest.mark.parametrize(
    "v, expected",
    [((8, -1, 5, 2), 16), ((0, 0, 0, 0), 0), ((2, 11, -5, -8), 26)],
)
def test_manhattan_norm(v, expected):
    assert manhattan_norm(v) == expected


def test_manhattan_norm_is_exact_beyond_float():
    big = 2**70 + 1
    assert manhattan_norm([big, -big]) == 2 * big


def test_parse_chsh():
    M = read_matrix(io.BytesIO(b"2 2\n1 1\n1 -1\n"))
    assert M == CHSH_MATRIX
    assert M.entries.dtype == np.int64


def test_parse_worked_matrix():
    M = read_matrix(io.BytesIO(b"4 4\n2 3 3 0\n3 2 -3 -3\n3 -3 2 3\n0 -3 3 2\n"))
    assert M == WORKED_MATRIX
    assert M.row(1).tolist() == [2, 3, 3, 0]
    assert M.row(4).tolist() == [0, -3, 3, 2]


def test_parse_error_names_row_and_column():
    with pytest.raises(MatrixParseError) as info:
        from_text("2 2\n1 x\n")
    # header is line 1, so matrix row 1 is line 2
    assert info.value.line == 2
    assert info.value.column == 2
    assert "row 1" in str(info.value)


@pytest.mark.parametrize(
    "text",
    [
        "",
        "2\n1 1\n1 1\n",
        "2 x\n1 1\n1 1\n",
        "0 2\n",
        "2 2\n1 1\n",
        "2 2\n1 1 1\n1 1\n",
        "1 1\n1.5\n",
    ],
)
def test_parse_rejects_malformed(text):
    with pytest.raises(MatrixParseError):
        from_text(text)


def test_overflow_rejected_unless_bigint():
    text = f"1 2\n{2**61} 0\n"
    with pytest.raises(MatrixParseError, match="bigint"):
        from_text(text)
    M = from_text(text, bigint=True)
    assert M.is_bigint
    assert M.tolist() == [[2**61, 0]]


def test_exact_limit_boundary():
    ok = IntegerMatrix.from_rows([[EXACT_LIMIT // 2, 0]])
    assert ok.entries.dtype == np.int64
    with pytest.raises(OverflowError):
        IntegerMatrix.from_rows([[EXACT_LIMIT // 2 + 1, 0]])


def test_read_from_path_and_write(tmp_path):
    path = tmp_path / "m.txt"
    write_matrix(WORKED_MATRIX, path)
    assert path.read_bytes() == b"4 4\n2 3 3 0\n3 2 -3 -3\n3 -3 2 3\n0 -3 3 2\n"
    assert read_matrix(path) == WORKED_MATRIX


def test_matrix_is_immutable():
    with pytest.raises(ValueError):
        WORKED_MATRIX.entries[0, 0] = 7


def test_rejects_non_integers():
    with pytest.raises(TypeError):
        IntegerMatrix.from_rows([[1.5, 2]])
    with pytest.raises(ValueError):
        IntegerMatrix.from_rows([[]])


@given(small_matrices)
@settings(max_examples=60, deadline=None)
def test_roundtrip_is_byte_identical(rows):
    M = IntegerMatrix.from_rows(rows)
    text = M.to_text()
    assert from_text(text).to_text() == text


def test_roundtrip_normalizes_whitespace():
    messy = "2  2\n 1\t1 \n1   -1\n\n"
    assert from_text(messy).to_text() == "2 2\n1 1\n1 -1\n"


def test_sign_assignment_rejects_zero():
    with pytest.raises(ValueError):
        SignAssignment((1, 0))


def test_value_chsh_all_plus():
    assert value(CHSH_MATRIX, SignAssignment((1, 1), (1, 1))) == 2


def test_value_all_plus_is_entry_sum():
    M = IntegerMatrix.from_rows([[4, -2, 7], [1, 1, -9]])
    assert value(M, SignAssignment((1, 1), (1, 1, 1))) == int(M.entries.sum())


def test_value_worked_best_assignments():
    # enumerate a_1 = +1 and the 8 settings of a_2..a_4 with best b
    vals = {
        a: value(WORKED_MATRIX, SignAssignment.complete(WORKED_MATRIX, a))
        for a in itertools.product((1,), (1, -1), (1, -1), (1, -1))
    }
    assert max(vals.values()) == 26
    assert {a for a, v in vals.items() if v == 26} == {(1, 1, -1, -1), (1, -1, 1, 1)}
    assert vals[(1, -1, 1, -1)] == 12


def test_value_dimension_mismatch():
    with pytest.raises(ValueError):
        value(CHSH_MATRIX, SignAssignment((1, 1, 1), (1, 1)))
    with pytest.raises(ValueError):
        value(CHSH_MATRIX, SignAssignment((1, 1)))


def test_complete_breaks_ties_to_plus():
    M = IntegerMatrix.from_rows([[1, 0], [-1, 3]])
    s = SignAssignment.complete(M, (1, 1))
    assert s.b == (1, 1)


@given(small_matrices.filter(lambda r: len(r[0]) <= 6), st.data())
@settings(max_examples=60, deadline=None)
def test_column_signs_maximize_over_b(rows, data):
    M = IntegerMatrix.from_rows(rows)
    a = data.draw(st.lists(st.sampled_from((1, -1)), min_size=M.rows, max_size=M.rows))
    combined = [sum(ai * r[j] for ai, r in zip(a, rows)) for j in range(M.cols)]
    best_b = max(
        value(M, SignAssignment(a, b)) for b in itertools.product((1, -1), repeat=M.cols)
    )
    assert manhattan_norm(combined) == best_b == value(M, SignAssignment.complete(M, a))


@given(small_matrices, st.data())
@settings(max_examples=60, deadline=None)
def test_global_sign_flip(rows, data):
    M = IntegerMatrix.from_rows(rows)
    a = data.draw(st.lists(st.sampled_from((1, -1)), min_size=M.rows, max_size=M.rows))
    flipped = [-x for x in a]
    assert value(M, SignAssignment.complete(M, a)) == value(M, SignAssignment.complete(M, flipped))
