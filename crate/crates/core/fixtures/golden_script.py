import pandas as pd
from photonai.base import Hyperpipe, PipelineElement
from sklearn.model_selection import KFold

df = pd.read_csv('breast_cancer.csv')
X = df[['mean_radius', 'mean_texture']].values
y = df['diagnosis'].values

my_pipe = Hyperpipe('demo_project',
                    optimizer='grid_search',
                    optimizer_params={},
                    metrics=['accuracy', 'balanced_accuracy'],
                    best_config_metric='accuracy',
                    outer_cv=KFold(n_splits=5),
                    inner_cv=KFold(n_splits=5))

my_pipe += PipelineElement('StandardScaler')

my_pipe += PipelineElement('PCA', hyperparameters={'n_components': [5, 10]})

my_pipe += PipelineElement('SVC', hyperparameters={'C': [0.1, 1, 10]})

my_pipe.fit(X, y)
