import io

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from balse.dataset import (
    RatingDataset, TagMatrix, map_label, parse_ratings, parse_tags, write_ratings, write_tags,
)
from balse.errors import DataError


def ratings(text):
    return parse_ratings(io.StringIO(text))


@pytest.mark.parametrize("label, value", [
    ("favorite", 4.0), ("like", 2.0), ("neutral", 0.1), ("dislike", -2.0),
    ("willsee", 0.5), ("wontsee", -0.5), ("FAVORITE", 4.0), (" Like ", 2.0),
])
def test_map_label(label, value):
    assert map_label(label) == value


def test_unknown_label_reports_line():
    with pytest.raises(DataError, match="line 3"):
        ratings("user,item,rating\nu1,i1,like\nu1,i2,meh\n")


def test_parse_two_rows():
    ds = ratings("user,item,rating\nu1,i1,like\nu1,i2,dislike\n")
    assert (ds.n, ds.m) == (1, 2)
    assert list(ds.values) == [2.0, -2.0]
    assert ds.user_ids == ("u1",) and ds.item_ids == ("i1", "i2")


def test_empty_body():
    ds = ratings("user,item,rating\n")
    assert (ds.n, ds.m, len(ds)) == (0, 0, 0)


def test_duplicate_pair_names_row():
    with pytest.raises(DataError, match=r"line 3.*'u1'.*'i1'"):
        ratings("user,item,rating\nu1,i1,like\nu1,i1,like\n")


@pytest.mark.parametrize("body", ["u1,i1\n", "u1,i1,like,extra\n", ",i1,like\n"])
def test_malformed_rows(body):
    with pytest.raises(DataError, match="line 2"):
        ratings("user,item,rating\n" + body)


def test_bad_header():
    with pytest.raises(DataError, match="header"):
        ratings("a,b,c\nu1,i1,like\n")


def test_numeric_variant_and_first_appearance_order():
    ds = ratings("user,item,value\nb,y,1.5\na,x,-0.25\nb,x,0\n")
    assert ds.user_ids == ("b", "a") and ds.item_ids == ("y", "x")
    assert ds.triples == [(0, 0, 1.5), (1, 1, -0.25), (0, 1, 0.0)]


def test_dataset_is_read_only():
    ds = ratings("user,item,value\nb,y,1.5\n")
    with pytest.raises(ValueError):
        ds.values[0] = 3.0


def test_out_of_bounds_rejected():
    with pytest.raises(DataError):
        RatingDataset.from_arrays([0, 2], [0, 0], [1.0, 1.0], n=2, m=1)


def _ds():
    return ratings("user,item,rating\nu1,i1,like\nu2,i2,favorite\n")


def test_parse_tags_aligns_rows():
    ds = _ds()
    tags = parse_tags(io.StringIO("item,tag,weight\ni1,1girl,0.9\ni1,weapon,0.4\n"), ds)
    assert tags.tag_names == ("1girl", "weapon")
    np.testing.assert_array_equal(tags.values, [[0.9, 0.4], [0.0, 0.0]])


def test_tag_weight_range():
    with pytest.raises(DataError, match="outside"):
        parse_tags(io.StringIO("item,tag,weight\ni1,cat,1.3\n"), _ds())


def test_empty_tag_file():
    ds = ratings("user,item,rating\nu,a,like\nu,b,like\nu,c,like\n")
    tags = parse_tags(io.StringIO("item,tag,weight\n"), ds)
    assert tags.values.shape == (3, 0) and tags.m == ds.m


def test_unknown_tag_item_skipped():
    tags = parse_tags(io.StringIO("item,tag,weight\nzz,cat,0.5\ni2,cat,0.5\n"), _ds())
    assert tags.skipped_rows == 1
    np.testing.assert_array_equal(tags.values, [[0.0], [0.5]])


ids = st.text(alphabet="abcdefgh0123", min_size=1, max_size=4)


@settings(max_examples=60, deadline=None)
@given(st.dictionaries(st.tuples(ids, ids), st.floats(-5, 5, allow_nan=False), max_size=40))
def test_ratings_round_trip(entries):
    text = "user,item,value\n" + "".join(f"{u},{i},{v!r}\n" for (u, i), v in entries.items())
    ds = ratings(text)
    buf = io.StringIO()
    write_ratings(ds, buf)
    again = ratings(buf.getvalue())
    assert (again.n, again.m) == (ds.n, ds.m)
    assert again.triples == ds.triples
    # index maps are bijections onto [0, n) and [0, m)
    assert sorted(ds.user_index(u) for u in ds.user_ids) == list(range(ds.n))
    assert sorted(ds.item_index(i) for i in ds.item_ids) == list(range(ds.m))


def test_label_round_trip():
    ds = ratings("user,item,rating\nu1,i1,favorite\nu1,i2,wontsee\nu2,i1,neutral\n")
    buf = io.StringIO()
    write_ratings(ds, buf, labels=True)
    assert ratings(buf.getvalue()).triples == ds.triples


def test_tags_round_trip():
    ds = _ds()
    tags = TagMatrix(np.array([[0.25, 0.0], [0.5, 1.0]]), ("a", "b"))
    buf = io.StringIO()
    write_tags(tags, ds.item_ids, buf)
    again = parse_tags(io.StringIO(buf.getvalue()), ds)
    np.testing.assert_array_equal(again.values, tags.values)
