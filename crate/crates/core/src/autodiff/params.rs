use super::{AutodiffError, Result, Tensor};

/// Named parameters in insertion order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParameterStore {
    entries: Vec<(String, Tensor)>,
}

impl ParameterStore {
    pub const fn new() -> Self {
        Self { entries: Vec::new() }
    }

    pub fn insert(&mut self, name: impl Into<String>, value: Tensor) -> Result<usize> {
        let name = name.into();
        if self.index_of(&name).is_some() {
            return Err(AutodiffError::DuplicateParameter(name));
        }
        self.entries.push((name, value));
        Ok(self.entries.len() - 1)
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.entries.iter().position(|(n, _)| n == name)
    }

    pub fn get(&self, name: &str) -> Result<&Tensor> {
        self.index_of(name)
            .map(|i| &self.entries[i].1)
            .ok_or_else(|| AutodiffError::UnknownParameter(name.to_string()))
    }

    pub fn get_mut(&mut self, name: &str) -> Result<&mut Tensor> {
        match self.index_of(name) {
            Some(i) => Ok(&mut self.entries[i].1),
            None => Err(AutodiffError::UnknownParameter(name.to_string())),
        }
    }

    pub fn by_index(&self, idx: usize) -> &Tensor {
        &self.entries[idx].1
    }

    pub fn by_index_mut(&mut self, idx: usize) -> &mut Tensor {
        &mut self.entries[idx].1
    }

    pub fn name(&self, idx: usize) -> &str {
        &self.entries[idx].0
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.entries.iter().map(|(n, t)| (n.as_str(), t))
    }

    pub fn tensors_mut(&mut self) -> impl Iterator<Item = &mut Tensor> {
        self.entries.iter_mut().map(|(_, t)| t)
    }

    /// Total number of scalar degrees of freedom (complex entries count twice).
    pub fn scalar_count(&self) -> usize {
        self.entries.iter().map(|(_, t)| t.data().len()).sum()
    }
}

/// One gradient tensor per parameter, aligned with the store order.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    tensors: Vec<Tensor>,
}

impl Gradients {
    pub(crate) fn new(tensors: Vec<Tensor>) -> Self {
        Self { tensors }
    }

    pub fn zeros_for(store: &ParameterStore) -> Self {
        Self {
            tensors: store.iter().map(|(_, t)| t.zeros_like()).collect(),
        }
    }

    pub fn get(&self, idx: usize) -> &Tensor {
        &self.tensors[idx]
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Tensor> {
        self.tensors.iter()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors.iter().all(Tensor::is_finite)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_are_unique_and_ordered() {
        let mut s = ParameterStore::new();
        s.insert("b", Tensor::scalar(1.0)).unwrap();
        s.insert("a", Tensor::scalar(2.0)).unwrap();
        assert!(matches!(
            s.insert("a", Tensor::scalar(3.0)),
            Err(AutodiffError::DuplicateParameter(_))
        ));
        let names: Vec<_> = s.iter().map(|(n, _)| n.to_string()).collect();
        assert_eq!(names, ["b", "a"]);
        assert_eq!(s.get("a").unwrap().data(), &[2.0]);
        assert!(s.get("c").is_err());
    }
}
