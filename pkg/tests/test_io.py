import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import numpy as np
import pytest

from descrank import (
    MISSING,
    EmbeddingSet,
    GoldLabels,
    LabelSpace,
    PredictionMatrix,
)
from descrank.errors import DimensionMismatchError, EmbeddingServiceError, ParseError
from descrank.io import (
    fetch_embeddings,
    read_embeddings,
    read_gold,
    read_predictions,
    text_digest,
    write_embeddings,
    write_gold,
    write_predictions,
)

SPACE = LabelSpace(("positive", "negative"))


def _random_matrix(rng, n_items=8, n_ann=3, missing_rate=0.25):
    cells = rng.integers(0, 2, size=(n_items, n_ann))
    mask = rng.random((n_items, n_ann)) < missing_rate
    mask[0, :] = False
    mask[:, 0] = False
    cells = np.where(mask, MISSING, cells)
    return PredictionMatrix(
        tuple(f"i{i}" for i in range(n_items)),
        tuple(f"w{j}" for j in range(n_ann)),
        cells,
    )


class TestPredictionsRoundTrip:
    def test_well_formed_file(self, tmp_path):
        path = tmp_path / "p.csv"
        path.write_text(
            "item_id,d1,d2\nfirst,positive,negative\nsecond,negative,negative\n"
        )
        matrix = read_predictions(path, SPACE)
        assert matrix.item_ids == ("first", "second")
        assert matrix.annotator_ids == ("d1", "d2")
        assert matrix.cells.tolist() == [[0, 1], [1, 1]]

    def test_empty_cell_is_missing(self, tmp_path):
        path = tmp_path / "p.csv"
        path.write_text("item_id,d1,d2\nfirst,,negative\n")
        matrix = read_predictions(path, SPACE)
        assert matrix.cells.tolist() == [[MISSING, 1]]

    def test_typo_class_names_row(self, tmp_path):
        path = tmp_path / "p.csv"
        path.write_text("item_id,d1,d2\nfirst,positve,negative\n")
        with pytest.raises(ParseError, match="row 1"):
            read_predictions(path, SPACE)

    def test_duplicate_ids_rejected(self, tmp_path):
        path = tmp_path / "p.csv"
        path.write_text("item_id,d1,d1\nfirst,positive,negative\n")
        with pytest.raises(ParseError, match="duplicate annotator"):
            read_predictions(path, SPACE)
        path.write_text("item_id,d1\nfirst,positive\nfirst,negative\n")
        with pytest.raises(ParseError, match="duplicate item"):
            read_predictions(path, SPACE)

    def test_round_trip_preserves_cells(self, tmp_path):
        rng = np.random.default_rng(301)
        for trial in range(5):
            matrix = _random_matrix(rng)
            path = tmp_path / f"rt{trial}.csv"
            write_predictions(path, matrix, SPACE)
            assert read_predictions(path, SPACE) == matrix


class TestGoldRoundTrip:
    def test_round_trip(self, tmp_path):
        gold = GoldLabels(("x", "y", "z"), np.array([0, 1, 0]))
        path = tmp_path / "gold.csv"
        write_gold(path, gold, SPACE)
        assert read_gold(path, SPACE) == gold

    def test_unknown_class_rejected(self, tmp_path):
        path = tmp_path / "gold.csv"
        path.write_text("item_id,label\nx,meh\n")
        with pytest.raises(ParseError, match="unknown class"):
            read_gold(path, SPACE)


class TestEmbeddingsRoundTrip:
    def test_basic_file(self, tmp_path):
        path = tmp_path / "e.jsonl"
        path.write_text(
            '{"id": "a", "vector": [1.0, 2.0, 3.0]}\n{"id": "b", "vector": [4.0, 5.0, 6.0]}\n'
        )
        embeddings = read_embeddings(path)
        assert len(embeddings) == 2 and embeddings.dim == 3
        assert embeddings.vector("b").tolist() == [4.0, 5.0, 6.0]

    def test_ragged_dimensions_rejected(self, tmp_path):
        path = tmp_path / "e.jsonl"
        path.write_text('{"id": "a", "vector": [1.0, 2.0, 3.0]}\n{"id": "b", "vector": [1.0]}\n')
        with pytest.raises(DimensionMismatchError):
            read_embeddings(path)

    def test_duplicate_id_rejected(self, tmp_path):
        path = tmp_path / "e.jsonl"
        path.write_text('{"id": "a", "vector": [1.0]}\n{"id": "a", "vector": [2.0]}\n')
        with pytest.raises(ParseError, match="duplicate id"):
            read_embeddings(path)

    def test_round_trip_is_bit_exact(self, tmp_path):
        rng = np.random.default_rng(307)
        vectors = rng.standard_normal((6, 5)) * 10.0 ** rng.integers(-8, 8, size=(6, 1))
        embeddings = EmbeddingSet(tuple(f"t{i}" for i in range(6)), vectors)
        path = tmp_path / "e.jsonl"
        write_embeddings(path, embeddings)
        loaded = read_embeddings(path)
        assert loaded.ids == embeddings.ids
        assert np.array_equal(loaded.vectors, embeddings.vectors)


class _MockHandler(BaseHTTPRequestHandler):
    def do_POST(self):
        if self.path != "/embed":
            self.send_error(404)
            return
        length = int(self.headers["Content-Length"])
        body = json.loads(self.rfile.read(length))
        self.server.requests.append(body)
        if self.server.malformed:
            payload = json.dumps({"surprise": True}).encode()
        else:
            vectors = [self.server.vector_for(t) for t in body["texts"]]
            payload = json.dumps({"vectors": vectors}).encode()
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(payload)))
        self.end_headers()
        self.wfile.write(payload)

    def log_message(self, *args):
        pass


@pytest.fixture
def mock_server():
    server = ThreadingHTTPServer(("127.0.0.1", 0), _MockHandler)
    server.requests = []
    server.malformed = False
    server.vector_for = lambda text: [float(len(text)), float(sum(text.encode()) % 97)]
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    try:
        yield server, f"http://127.0.0.1:{server.server_address[1]}"
    finally:
        server.shutdown()
        server.server_close()


class TestFetchEmbeddings:
    def test_empty_text_list_sends_no_request(self, mock_server):
        server, url = mock_server
        result = fetch_embeddings(url, [])
        assert len(result) == 0
        assert server.requests == []

    def test_matches_mock_vectors(self, mock_server):
        server, url = mock_server
        texts = ["great", "terrible", "so-so"]
        result = fetch_embeddings(url, texts)
        assert result.ids == tuple(texts)
        for text in texts:
            assert result.vector(text).tolist() == server.vector_for(text)
        assert len(server.requests) == 1
        assert server.requests[0] == {"texts": texts}

    def test_second_call_served_from_cache(self, mock_server, tmp_path):
        server, url = mock_server
        cache = tmp_path / "cache.jsonl"
        texts = ["alpha", "beta"]
        first = fetch_embeddings(url, texts, cache_path=cache)
        assert len(server.requests) == 1
        second = fetch_embeddings(url, texts, cache_path=cache)
        assert len(server.requests) == 1  # zero new requests
        assert np.array_equal(first.vectors, second.vectors)
        # partial overlap only fetches the novel text
        fetch_embeddings(url, ["alpha", "gamma"], cache_path=cache)
        assert len(server.requests) == 2
        assert server.requests[1] == {"texts": ["gamma"]}

    def test_cache_file_keyed_by_digest(self, mock_server, tmp_path):
        server, url = mock_server
        cache = tmp_path / "cache.jsonl"
        fetch_embeddings(url, ["hello"], cache_path=cache)
        record = json.loads(cache.read_text().strip())
        assert record["digest"] == text_digest("hello")

    def test_explicit_ids(self, mock_server):
        server, url = mock_server
        result = fetch_embeddings(url, ["same text", "same text"], ids=["k1", "k2"])
        assert result.ids == ("k1", "k2")
        assert np.array_equal(result.vectors[0], result.vectors[1])
        assert server.requests[0] == {"texts": ["same text"]}

    def test_malformed_response(self, mock_server):
        server, url = mock_server
        server.malformed = True
        with pytest.raises(EmbeddingServiceError):
            fetch_embeddings(url, ["x"])

    def test_unreachable_endpoint(self):
        with pytest.raises(EmbeddingServiceError):
            fetch_embeddings("http://127.0.0.1:9", ["x"], timeout=0.2)
