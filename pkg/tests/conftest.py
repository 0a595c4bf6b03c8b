import pytest

from motionseg.synthetic import write_blob_dataset


@pytest.fixture(scope="session")
def blob_manifest_path(tmp_path_factory):
    """One synthetic two-category video dataset shared by the session."""
    root = tmp_path_factory.mktemp("blob_dataset")
    return write_blob_dataset(root, seed=0, with_scores=True)
