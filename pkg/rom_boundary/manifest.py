"""
Run manifests

Every artifact-producing command writes `<output>.manifest.json` recording
the command, its configuration, SHA-256 digests of inputs and outputs and the
library version. Manifests can be signed with ECDSA (P-256, SHA-256).
"""

import base64
import hashlib
import json
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

from Crypto.PublicKey import ECC
from Crypto.Signature import DSS
from Crypto.Hash import SHA256

from . import __version__
from .config import get_settings
from .logger import logger

MANIFEST_VERSION = "1.0"


def file_sha256(path: Union[str, Path]) -> str:
    digest = hashlib.sha256()
    with open(path, 'rb') as f:
        for chunk in iter(lambda: f.read(1 << 20), b''):
            digest.update(chunk)
    return digest.hexdigest()


def utc_now() -> str:
    return datetime.now(timezone.utc).isoformat().replace('+00:00', 'Z')


def manifest_path_for(output: Union[str, Path]) -> Path:
    output = Path(output)
    return output.with_name(output.name + ".manifest.json")


@dataclass
class RunManifest:
    command: str
    config: Dict
    inputs: Dict[str, str] = field(default_factory=dict)  # path -> sha256
    outputs: Dict[str, str] = field(default_factory=dict)
    started_at: str = field(default_factory=utc_now)
    finished_at: Optional[str] = None
    version: str = MANIFEST_VERSION
    library_version: str = __version__

    def add_input(self, path: Union[str, Path]):
        self.inputs[str(path)] = file_sha256(path)

    def add_output(self, path: Union[str, Path]):
        self.outputs[str(path)] = file_sha256(path)

    def to_dict(self) -> Dict:
        return asdict(self)

    def write(self, path: Union[str, Path], signer: Optional["ManifestSigner"] = None) -> Path:
        self.finished_at = self.finished_at or utc_now()
        data = self.to_dict()
        if signer is not None:
            data = signer.sign(data)
        path = Path(path)
        with open(path, 'w') as f:
            json.dump(data, f, indent=2)
        logger.log_artifact_written("Manifest", path)
        return path


class ManifestSigner:
    """ECDSA signing of manifest dictionaries"""

    def __init__(self, keys_dir: Optional[Union[str, Path]] = None):
        keys_dir = Path(keys_dir) if keys_dir else get_settings().keys_dir
        self.private_key_path = keys_dir / "private_key.pem"
        self.public_key_path = keys_dir / "public_key.pem"

    def ensure_keys(self):
        if not self.private_key_path.exists():
            self.generate_keys()

    def generate_keys(self):
        """Generate a new P-256 key pair"""
        self.private_key_path.parent.mkdir(parents=True, exist_ok=True)
        key = ECC.generate(curve='P-256')

        with open(self.private_key_path, 'wb') as f:
            f.write(key.export_key(format='PEM').encode())

        with open(self.public_key_path, 'wb') as f:
            f.write(key.public_key().export_key(format='PEM').encode())

        logger.info(f"Generated new manifest signing key pair at {self.private_key_path.parent}")

    def load_private_key(self) -> ECC.EccKey:
        with open(self.private_key_path, 'r') as f:
            return ECC.import_key(f.read())

    def load_public_key(self) -> ECC.EccKey:
        with open(self.public_key_path, 'r') as f:
            return ECC.import_key(f.read())

    @staticmethod
    def content_hash(data: Dict) -> str:
        # the signature block is not part of the signed content
        clean = {k: v for k, v in data.items() if k != '_signature'}
        json_str = json.dumps(clean, sort_keys=True, separators=(',', ':'))
        return hashlib.sha256(json_str.encode()).hexdigest()

    def sign(self, data: Dict) -> Dict:
        self.ensure_keys()
        content_hash = self.content_hash(data)

        signer = DSS.new(self.load_private_key(), 'fips-186-3')
        signature = signer.sign(SHA256.new(content_hash.encode()))

        signed = dict(data)
        signed['_signature'] = {
            'algorithm': 'ECDSA-SHA256',
            'signature': base64.b64encode(signature).decode(),
            'public_key': self.load_public_key().export_key(format='PEM'),
            'signed_at': utc_now(),
            'content_hash': content_hash,
        }
        return signed

    def verify_signature(self, data: Dict) -> bool:
        info = data.get('_signature')
        if not info:
            return False
        try:
            signature = base64.b64decode(info['signature'])
            if info['content_hash'] != self.content_hash(data):
                return False
            public_key = ECC.import_key(info['public_key'])
            DSS.new(public_key, 'fips-186-3').verify(SHA256.new(info['content_hash'].encode()), signature)
            return True
        except (KeyError, ValueError, TypeError) as e:
            logger.debug(f"Manifest signature check failed: {e}")
            return False


def verify_manifest(path: Union[str, Path], require_signature: bool = False) -> Tuple[bool, str, List[str]]:
    """
    Check a manifest's signature (when present or required) and re-hash every
    file it lists. Returns (valid, message, problems).
    """
    try:
        with open(path, 'r') as f:
            data = json.load(f)
    except FileNotFoundError:
        return False, "Manifest file not found", []
    except json.JSONDecodeError:
        return False, "Invalid manifest format", []

    problems = []
    if '_signature' in data:
        if not ManifestSigner().verify_signature(data):
            problems.append("invalid signature - manifest has been modified")
    elif require_signature:
        problems.append("manifest is not signed")

    base = Path(path).parent
    for section in ("inputs", "outputs"):
        for file_path, expected in data.get(section, {}).items():
            candidate = Path(file_path)
            if not candidate.exists() and not candidate.is_absolute():
                candidate = base / candidate.name
            if not candidate.exists():
                problems.append(f"{section[:-1]} missing: {file_path}")
            elif file_sha256(candidate) != expected:
                problems.append(f"{section[:-1]} changed: {file_path}")

    if problems:
        return False, "; ".join(problems), problems
    return True, "Manifest is valid and all files match", []
