import numpy as np
import pytest

from maskgrad import MlpClassifier, RngStream, stratified_split, synth_dataset


@pytest.fixture(scope="session")
def blob_data():
    ds = synth_dataset(5, 12, 200, 0.5, RngStream(11, "synth"))
    return stratified_split(ds, 0.8, RngStream(11, "split"))


@pytest.fixture(scope="session")
def trained_blob_model(blob_data):
    train, _ = blob_data
    clf = MlpClassifier(hidden_dims=(32, 16), dropout_rate=0.2, epochs=8,
                        batch_size=32, seed=11)
    return clf.fit(train.features, train.labels)
