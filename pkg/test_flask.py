import json

import pytest

from app import app
from services.taskgraph import graph_to_dict


@pytest.fixture
def client():
    app.config['TESTING'] = True
    with app.test_client() as client:
        yield client


def test_health(client):
    response = client.get('/api/health')
    assert response.status_code == 200
    assert response.get_json()['success'] is True


def test_algorithms(client):
    data = client.get('/api/algorithms').get_json()
    assert 'sp_firstfit' in data['algorithms']
    assert data['extra_algorithms'] == ['exhaustive']


def test_response_keys_keep_their_order(client):
    body = json.loads(client.get('/api/algorithms').data)
    assert list(body) == ['success', 'algorithms', 'extra_algorithms']


def test_decompose(client, fig1):
    response = client.post('/api/decompose', json={'graph': graph_to_dict(fig1)})
    data = response.get_json()
    assert response.status_code == 200
    assert data['tree_count'] == 1


def test_map_then_evaluate(client, fig2):
    graph = graph_to_dict(fig2)
    mapped = client.post('/api/map', json={'graph': graph, 'algorithm': 'single_node', 'seed': 1}).get_json()
    assert mapped['success'] is True
    assert mapped['iterations'] <= 6

    scored = client.post('/api/evaluate', json={'graph': graph, 'mapping': mapped['mapping'], 'seed': 1}).get_json()
    assert scored['success'] is True
    assert scored['makespan'] == pytest.approx(mapped['mapping']['makespan'])


def test_bad_requests_return_400(client, fig1):
    assert client.post('/api/map', json={'nodes': []}).status_code == 400

    response = client.post('/api/map', json={'graph': graph_to_dict(fig1), 'algorithm': 'annealing'})
    assert response.status_code == 400
    assert 'Unknown algorithm' in response.get_json()['error']

    mapping = {'assignment': [{'task': v, 'unit': 9} for v in range(6)]}
    response = client.post('/api/evaluate', json={'graph': graph_to_dict(fig1), 'mapping': mapping})
    assert response.status_code == 400
    assert response.get_json()['success'] is False
