import csv
import io
import json
import os

from django.core.files.base import ContentFile
from django.core.files.storage import FileSystemStorage

from .conf import bounds_setting


class ArtifactStorage(FileSystemStorage):
    """Output files under one directory, written under their exact names.

    Existing artifacts are replaced in place, so repeated runs with the same
    configuration produce the same file set.
    """

    def __init__(self, location=None, **kwargs):
        super().__init__(location=str(location or bounds_setting('OUTPUT_DIR')), **kwargs)

    def _save(self, name, content):
        """
        Save the content, creating missing directories
        """
        full_path = self.path(name)
        directory = os.path.dirname(full_path)

        if not os.path.exists(directory):
            os.makedirs(directory)

        with open(full_path, 'wb') as dest:
            for chunk in content.chunks():
                dest.write(chunk)
        return name

    def get_available_name(self, name, max_length=None):
        """
        Returns ``name`` unchanged after removing any previous artifact of that name.
        """
        if self.exists(name):
            self.delete(name)
        return name

    def write_text(self, name, text):
        """Write ``text`` as UTF-8 and return the absolute path."""
        self.save(name, ContentFile(text.encode('utf-8')))
        return self.path(name)

    def write_json(self, name, document):
        """Sorted keys and shortest round-trip floats; non-finite values are written as Infinity."""
        return self.write_text(name, json.dumps(document, indent=2, sort_keys=True) + '\n')

    def write_csv(self, name, header, rows):
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator='\n')
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_cell(v) for v in row])
        return self.write_text(name, buffer.getvalue())

    def read_json(self, name):
        with self.open(name, 'rb') as handle:
            return json.loads(handle.read().decode('utf-8'))


def format_cell(value):
    """CSV representation: shortest round-trip repr for floats, ``inf`` for infinity."""
    if isinstance(value, bool) or value is None:
        return '' if value is None else str(value).lower()
    if isinstance(value, float) or hasattr(value, 'dtype'):
        if hasattr(value, 'dtype') and value.dtype.kind in 'iu':
            return str(int(value))
        return repr(float(value))
    return str(value)
