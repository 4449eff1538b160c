import { ApiClient } from './api';
import { Labeler } from './labeler';
import {
  bindKeyboard,
  clearError,
  renderEstimates,
  renderQuery,
  showError,
} from './view';

/** App entry: the session id lives in the URL (?session=...) so a labeling
 * session can be shared or reopened; all state is refetched on load. */

const api = new ApiClient('');

function startLabeler(sessionId: string): Labeler {
  const labeler: Labeler = new Labeler(api, sessionId, {
    onQuery: (query) =>
      renderQuery(
        query,
        (label) => {
          clearError();
          void labeler.answer(label);
        },
        () => void labeler.skip(),
      ),
    onEstimates: renderEstimates,
    onError: showError,
  });
  bindKeyboard((label) => {
    clearError();
    void labeler.answer(label);
  });
  void labeler.refresh().catch((err) => showError(String(err), true));
  return labeler;
}

function renderCreateForm(): void {
  const mount = document.getElementById('query');
  if (!mount) return;
  mount.innerHTML = `
    <form id="create" class="query-card">
      <p class="prompt">Start a labeling session</p>
      <label>Manifest CSV <input name="manifest" value="manifest.csv"></label>
      <label>Detections CSV <input name="detections" value="detections.csv"></label>
      <button type="submit">Create session</button>
    </form>`;
  const form = document.getElementById('create') as HTMLFormElement;
  form.onsubmit = (ev) => {
    ev.preventDefault();
    const data = new FormData(form);
    api
      .createSession({
        manifest: String(data.get('manifest')),
        detections: String(data.get('detections')),
      })
      .then((created) => {
        const url = new URL(window.location.href);
        url.searchParams.set('session', created.id);
        window.history.replaceState(null, '', url);
        startLabeler(created.id);
      })
      .catch((err) => showError(String(err), false));
  };
}

const sessionId = new URLSearchParams(window.location.search).get('session');
if (sessionId) {
  startLabeler(sessionId);
} else {
  renderCreateForm();
}
